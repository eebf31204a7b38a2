"""Stand-in first/last-frame generator driven by ``mode``.

copy    out.y4m = priors.y4m (luma from priors, gray chroma)
short   out.y4m = first.y4m only
fail    exit 1 with a message on stderr
"""
import os
import shutil
import sys

mode, workdir = sys.argv[1], sys.argv[2]
if mode == "fail":
    sys.stderr.write("model weights not found\n")
    sys.exit(1)
src = "priors.y4m" if mode == "copy" else "first.y4m"
shutil.copyfile(os.path.join(workdir, src), os.path.join(workdir, "out.y4m"))
