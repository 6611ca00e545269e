from polgen.rng import Rng


def test_same_seed_same_sequence():
    a, b = Rng(42), Rng(42)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_different_seed_diverges():
    assert Rng(1).next_u64() != Rng(2).next_u64()


def test_state_round_trip():
    a = Rng(7)
    for _ in range(10):
        a.next_u64()
    state = a.getstate()
    expected = [a.next_u64() for _ in range(20)]
    b = Rng(0)
    b.setstate(state)
    assert [b.next_u64() for _ in range(20)] == expected


def test_random_in_unit_interval():
    rng = Rng(3)
    for _ in range(10_000):
        x = rng.random()
        assert 0.0 <= x < 1.0


def test_randrange_bounds_and_coverage():
    rng = Rng(5)
    seen = {rng.randrange(7) for _ in range(1000)}
    assert seen == set(range(7))


def test_shuffle_is_permutation_and_deterministic():
    a = list(range(50))
    b = list(range(50))
    Rng(9).shuffle(a)
    Rng(9).shuffle(b)
    assert a == b
    assert sorted(a) == list(range(50))


def test_sample_distinct():
    rng = Rng(11)
    picked = rng.sample(list(range(30)), 10)
    assert len(set(picked)) == 10


def test_uniform_mean_band():
    rng = Rng(13)
    xs = [rng.random() for _ in range(10_000)]
    assert 0.48 < sum(xs) / len(xs) < 0.52


def test_pinned_first_draws():
    # Frozen reference values: any change here breaks replayability of
    # every existing seed, checkpoint, and log digest.
    rng = Rng(0)
    assert [rng.next_u64() for _ in range(3)] == PINNED_SEED0_DRAWS


PINNED_SEED0_DRAWS = [
    11091344671253066420,
    13793997310169335082,
    1900383378846508768,
]
