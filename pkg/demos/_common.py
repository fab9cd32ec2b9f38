import os
import sys


def out_dir(name):
    """demos_out/<name> next to this file, or the directory given on the command line."""
    root = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "demos_out")
    path = os.path.join(root, name)
    os.makedirs(path, exist_ok=True)
    return path
