# run_naevo.py

import os
import sys

# Make the 'naevo' package under src/ importable when running from the repository root.
current_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(current_dir, 'src'))

try:
    from naevo.cli import main
except ImportError as e:
    print(f"Error: Could not import naevo. Ensure 'src' directory is in PYTHONPATH or script is run correctly: {e}")
    sys.exit(1)

if __name__ == "__main__":
    sys.exit(main())
