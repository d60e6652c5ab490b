"""
Environment configuration for the cycles CLI and scripts
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

REPO_ROOT = Path(__file__).resolve().parent.parent

OUTPUT_DIR = Path(os.environ.get("CYCLES_OUTPUT_DIR", "cycles_output"))
DEMO_DIR = Path(os.environ.get("CYCLES_DEMO_DIR", str(REPO_ROOT / "demos")))
LLN_WORKERS = max(1, int(os.environ.get("CYCLES_LLN_WORKERS", "1")))
QUIET = os.environ.get("CYCLES_QUIET", "").strip().lower() in ("1", "true", "yes")

# reported by setup_test_cycles.py
ENV_VARS = {
    "CYCLES_OUTPUT_DIR": "default run/demo output directory",
    "CYCLES_DEMO_DIR": "directory holding the demo .cyc files",
    "CYCLES_LLN_WORKERS": "worker threads for Monte Carlo replicas",
    "CYCLES_QUIET": "set to 1 to silence progress lines",
}
