import os
import sys

VIZ_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if VIZ_DIR not in sys.path:
    sys.path.insert(0, VIZ_DIR)
