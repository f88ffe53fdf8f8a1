import os
import sys

# Allow 8 worker threads even on small CI boxes; must precede numba import.
os.environ.setdefault("NUMBA_NUM_THREADS", "8")

sys.path.insert(0, os.path.dirname(__file__))
