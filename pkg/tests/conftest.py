import os
import sys

# make the shared fixture modules importable regardless of invocation dir
sys.path.insert(0, os.path.dirname(__file__))
