"""The numba kernels and the pure-Python fallback must agree."""
import json
import os
import subprocess
import sys

import numpy as np

from hamshade import _jit
from hamshade.flow import flow_at, tangent_flow
from hamshade.hamsys import henon_heiles

PROBE = """
import json
import numpy as np
from hamshade._jit import backend
from hamshade.flow import flow_at, tangent_flow
from hamshade.hamsys import henon_heiles
sys_ = henon_heiles()
x0 = np.array([0.0, 0.1, 0.3, 0.05])
tan = tangent_flow(sys_, x0, 2.0)
print(json.dumps({"backend": backend(), "x": flow_at(sys_, x0, 2.0).tolist(),
                  "tx": tan.x_final.tolist(), "M": tan.M.tolist()}))
"""


def _probe(no_jit):
    env = dict(os.environ)
    env.pop("HAMSHADE_NO_JIT", None)
    if no_jit:
        env["HAMSHADE_NO_JIT"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], capture_output=True, text=True,
                         env=env, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_fallback_matches_jit():
    fast, slow = _probe(False), _probe(True)
    assert fast["backend"] == "numba" and slow["backend"] == "python"
    for key in ("x", "tx", "M"):
        np.testing.assert_allclose(slow[key], fast[key], rtol=0, atol=1e-12)


def test_in_process_backend_agrees_with_probe():
    probe = _probe(_jit.DISABLED)
    x0 = np.array([0.0, 0.1, 0.3, 0.05])
    np.testing.assert_array_equal(flow_at(henon_heiles(), x0, 2.0), probe["x"])
    np.testing.assert_array_equal(tangent_flow(henon_heiles(), x0, 2.0).M, probe["M"])
