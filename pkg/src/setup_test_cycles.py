#!/usr/bin/env python3
"""
Setup and Test - cycles-of-value simulator
Checks packages and settings, then runs one demo end to end
"""

import csv
import os
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from dotenv import load_dotenv
load_dotenv()

EXPECTED_HEADERS = {
    "cycle_": ["tick", "time", "va", "ve", "vl", "vg"],
    "agent_": ["tick", "time", "stock"],
    "pools": ["tick", "time", "pool", "level", "cumulative_outflow"],
    "sink": ["tick", "time", "sink"],
}


def check_requirements():
    """Check required packages"""
    print("🔍 Checking requirements...")

    required = {
        'numpy': 'pip install numpy',
        'pandas': 'pip install pandas',
        'lark': 'pip install lark',
        'dotenv': 'pip install python-dotenv',
    }

    missing = []
    for package, install_cmd in required.items():
        try:
            __import__(package)
            print(f"  ✓ {package}")
        except ImportError:
            print(f"  ❌ {package} - Run: {install_cmd}")
            missing.append(package)

    return len(missing) == 0


def check_env_vars():
    """Report optional environment variables; none is required"""
    print("\n🔍 Checking environment variables...")
    from cycles_config import ENV_VARS

    for var, description in ENV_VARS.items():
        value = os.getenv(var)
        if value:
            shown = value[:24] + "..." if len(value) > 24 else value
            print(f"  ✓ {var} = {shown}")
        else:
            print(f"  ⚠ {var} not set ({description}), using default")
    return True


def check_demo_files():
    """Every demo file parses to the same AST as its embedded text"""
    print("\n🔍 Checking demo files...")
    from cycles_config import DEMO_DIR
    from demo_scenarios import DEMO_NAMES, demo_file, demo_source
    from scenario_dsl import ScenarioError, parse_scenario

    ok = True
    for name in DEMO_NAMES:
        path = demo_file(name, DEMO_DIR)
        try:
            same = parse_scenario(path.read_text(encoding="utf-8")) == parse_scenario(demo_source(name))
        except (OSError, ScenarioError) as e:
            print(f"  ❌ {path.name}: {e}")
            ok = False
            continue
        if same:
            print(f"  ✓ {path.name}")
        else:
            print(f"  ⚠ {path.name} differs from the built-in text")
            ok = False
    return ok


def verify_run_outputs(run_dir: Path) -> list:
    """Header problems of a run directory; empty when every file is well-formed"""
    problems = []
    run_dir = Path(run_dir)
    for path in sorted(run_dir.glob("*.csv")):
        expected = next((h for prefix, h in EXPECTED_HEADERS.items() if path.name.startswith(prefix)), None)
        if expected is None:
            continue
        with open(path, newline="", encoding="utf-8") as f:
            header = next(csv.reader(f), [])
        if header != expected:
            problems.append(f"{path.name}: header {','.join(header)} (expected {','.join(expected)})")
    if not (run_dir / "policies.json").exists():
        problems.append("policies.json not created")
    return problems


def run_test_demo():
    """Run the savings demo into a temporary directory and verify the files"""
    print("\n🚀 Running the savings demo...")
    try:
        from cycles_cli import print_report, run_demo

        with tempfile.TemporaryDirectory() as tmp:
            report = run_demo("savings", Path(tmp))
            print_report(report)
            run_dir = Path(tmp) / "savings"

            print("\n📁 Checking output files...")
            for file in sorted(run_dir.iterdir()):
                print(f"  ✓ {file.name} ({file.stat().st_size} bytes)")

            print("\n🔍 Verifying format...")
            problems = verify_run_outputs(run_dir)
            for problem in problems:
                print(f"  ⚠ {problem}")
            if not problems:
                print("  ✓ All headers correct")
            return report.passed and not problems
    except Exception as e:
        print(f"\n❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return False


def main():
    """Main setup flow"""
    print("""
╔══════════════════════════════════════════════════════════════╗
║   SETUP & TEST - cycles of value                             ║
╚══════════════════════════════════════════════════════════════╝
""")

    checks = {"Requirements": check_requirements()}
    if checks["Requirements"]:
        checks["Environment"] = check_env_vars()
        checks["Demo files"] = check_demo_files()
        checks["Savings demo"] = run_test_demo()

    print("\n" + "=" * 80)
    print("SETUP SUMMARY")
    print("=" * 80)

    all_passed = True
    for check_name, passed in checks.items():
        status = "✅ PASS" if passed else "❌ FAIL"
        print(f"{check_name:20} {status}")
        if not passed:
            all_passed = False

    if not all_passed:
        print("\n⚠️  Please fix the failed checks above before proceeding.")
        print("\nCommon fixes:")
        print("  - Install packages: pip install -r requirements.txt")
        print("  - Point CYCLES_DEMO_DIR at the demos/ directory")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
