import sys
from pathlib import Path

# test-local helpers (oracles, fixtures) importable without packaging them
sys.path.insert(0, str(Path(__file__).parent))
