#!/usr/bin/env python3
"""
Setup Verification Script
Checks that the dependencies import and the package runs a tiny sample.
"""

import sys
import tempfile
from pathlib import Path

GREEN = '\033[92m'
RED = '\033[91m'
YELLOW = '\033[93m'
BLUE = '\033[94m'
RESET = '\033[0m'


def print_header(text):
    print(f"\n{BLUE}{'=' * 60}{RESET}")
    print(f"{BLUE}{text.center(60)}{RESET}")
    print(f"{BLUE}{'=' * 60}{RESET}\n")


def check_python_version():
    """Check if Python version is 3.9 or higher."""
    print("Checking Python version...")
    version = sys.version_info
    if (version.major, version.minor) >= (3, 9):
        print(f"  {GREEN}✓{RESET} Python {version.major}.{version.minor}.{version.micro}")
        return True
    print(f"  {RED}✗{RESET} Python {version.major}.{version.minor}.{version.micro} (need 3.9+)")
    return False


def check_dependencies():
    """Check if all required packages are installed."""
    print("\nChecking dependencies...")

    required_packages = ['numpy', 'scipy', 'pandas', 'matplotlib', 'pydantic', 'dotenv', 'tqdm', 'jinja2', 'pytest']

    all_installed = True
    for package in required_packages:
        try:
            __import__(package)
            print(f"  {GREEN}✓{RESET} {package}")
        except ImportError:
            print(f"  {RED}✗{RESET} {package} (not installed)")
            all_installed = False

    return all_installed


def check_env_file():
    print("\nChecking environment configuration...")
    if not Path('.env').exists():
        print(f"  {YELLOW}!{RESET} .env file not found (optional; defaults apply)")
        return True
    print(f"  {GREEN}✓{RESET} .env file exists")
    return True


def test_imports():
    """Test if all modules can be imported."""
    print("\nTesting module imports...")

    modules = [
        ('src.utils.config', 'Config'),
        ('src.utils.exceptions', 'LoopSoupError'),
        ('src.samplers.lattice_walk', 'loop_count'),
        ('src.samplers.brownian', 'sample_bridge'),
        ('src.coupling.kmt', 'build_coupling'),
        ('src.coupling.soup', 'theorem1_report'),
        ('src.analyzers.domain', 'restrict_soup'),
        ('src.visualizers.svg_renderer', 'render_svg'),
        ('src.cli', 'main'),
    ]

    all_imported = True
    for module_name, name in modules:
        try:
            module = __import__(module_name, fromlist=[name])
            getattr(module, name)
            print(f"  {GREEN}✓{RESET} {module_name}")
        except Exception as e:
            print(f"  {RED}✗{RESET} {module_name}: {str(e)}")
            all_imported = False

    return all_imported


def test_sample_run():
    """Sample a tiny soup through the command-line driver."""
    print("\nRunning a tiny sample...")
    try:
        from src.cli import main as cli_main
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / 'soup.json'
            code = cli_main(['sample', '--lambda', '1', '--scale', '2', '--window=-2:2',
                             '--nmax', '8', '--out', str(out)])
            if code == 0 and out.exists():
                print(f"  {GREEN}✓{RESET} sample written")
                return True
            print(f"  {RED}✗{RESET} sample exited with code {code}")
            return False
    except Exception as e:
        print(f"  {RED}✗{RESET} {e}")
        return False


def main():
    """Run all verification checks."""
    print_header("Loop Soup Coupling - Setup Verification")

    checks = [
        ("Python Version", check_python_version),
        ("Dependencies", check_dependencies),
        ("Environment Configuration", check_env_file),
        ("Module Imports", test_imports),
        ("Sample Run", test_sample_run),
    ]

    results = []
    for name, check_func in checks:
        try:
            results.append((name, check_func()))
        except Exception as e:
            print(f"{RED}Error in {name}: {e}{RESET}")
            results.append((name, False))

    print_header("Verification Summary")

    passed = sum(1 for _, result in results if result)
    total = len(results)

    for name, result in results:
        status = f"{GREEN}PASS{RESET}" if result else f"{RED}FAIL{RESET}"
        print(f"{name:<30} {status}")

    print(f"\n{BLUE}Score: {passed}/{total}{RESET}")

    if passed == total:
        print(f"\n{GREEN}✓ All checks passed.{RESET}")
        print(f"\n{BLUE}Try:{RESET}")
        print(f"  {GREEN}./run.sh{RESET}")
        print(f"  or")
        print(f"  {GREEN}python -m src verify --list{RESET}")
        return 0
    print(f"\n{YELLOW}! Some checks failed. Please address the issues above.{RESET}")
    print(f"\n{BLUE}Common fix:{RESET}")
    print(f"  • Install dependencies: {GREEN}pip install -r requirements.txt{RESET}")
    return 1


if __name__ == '__main__':
    sys.exit(main())
