"""
PRIVATE SPEECH - LAUNCHER

Main entry point. Checks dependencies, prints a short system summary and
hands the arguments to the command line interface.

    python start_app.py prepare --config configs/desk_scale.json5
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))


def check_dependencies():
    """Make sure all required packages are installed"""

    missing = []

    for module, package in (
        ("torch", "torch"),
        ("numpy", "numpy"),
        ("scipy", "scipy"),
        ("librosa", "librosa"),
        ("pydub", "pydub"),
        ("PIL", "pillow"),
        ("matplotlib", "matplotlib"),
        ("json5", "json5"),
        ("dotenv", "python-dotenv"),
        ("psutil", "psutil"),
    ):
        try:
            __import__(module)
        except ImportError:
            missing.append(package)

    if missing:
        print("=" * 60)
        print("ERROR: Missing required packages!")
        print("=" * 60)
        print("\nPlease install missing packages:")
        print(f"  pip install {' '.join(missing)}")
        print("\nOr install all dependencies:")
        print("  pip install -r requirements.txt")
        print("\n" + "=" * 60)
        sys.exit(1)


def check_memory_health():
    """Warn when little memory is left for training"""
    try:
        import psutil
        memory = psutil.virtual_memory()
        available_gb = memory.available / (1024**3)
        total_gb = memory.total / (1024**3)

        print(f"  Memory: {available_gb:.1f} GB available / {total_gb:.1f} GB total")
        if available_gb < 2.0:
            print("  [!] WARNING: Low memory available (< 2 GB)")
            return False
        return True
    except ImportError:
        return True


def print_startup_info():
    from settings.config import Config
    from utils.gpu_manager import get_gpu_info

    print("=" * 60)
    print("PRIVATE SPEECH")
    print("Filter/generator privacy for spoken digits")
    print("=" * 60)
    check_memory_health()

    gpu = get_gpu_info()
    if gpu.get("available"):
        print(f"  [OK] GPU available: {gpu.get('device_name')}")
    else:
        print("  [!] No GPU detected, training runs on the CPU")
    print(f"  Output: {Config.OUTPUT_DIR}")
    print("=" * 60)


def main() -> int:
    check_dependencies()
    if len(sys.argv) > 1 and sys.argv[1] not in ("-h", "--help"):
        print_startup_info()

    from ui.cli import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nInterrupted. Re-run the same command to resume from the last checkpoint.")
        sys.exit(1)
