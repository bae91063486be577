import sys
from pathlib import Path

# Make helpers importable regardless of pytest rootdir settings.
sys.path.insert(0, str(Path(__file__).parent))
