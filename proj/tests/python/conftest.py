import os
import sys

# Prefer the module staged in the CMake build tree over an editable install.
_staged = os.environ.get("TERMEVAL_STAGED_PYTHONPATH")
if _staged:
    sys.meta_path[:] = [f for f in sys.meta_path if "skbc" not in type(f).__module__]
    sys.path.insert(0, _staged)
    for name in [m for m in sys.modules if m == "termeval" or m.startswith("termeval.")]:
        del sys.modules[name]
