"""Synthetic instance generation and instance file I/O.

Generation draws from four independent streams of the counter-based Philox
generator, split by SeedSequence spawn keys so each component is a pure
function of (seed, stream):

    stream 0: entries of A          stream 2: signal values on the support
    stream 1: support selection     stream 3: additive noise

A is m-by-n i.i.d. standard Gaussian, the support S (|S| = s) is uniform
without replacement, x_orig is Gaussian on S and zero elsewhere, and
b = A x_orig + 0.01 * noise.  The box variant uses bounds +-5 and the given
lam; the ball variant uses sigma = nf * ||0.01 * noise||.

On disk an instance is a JSON manifest naming the variant and scalar
parameters plus a Matrix Market file for A (array or coordinate format) and
one-value-per-line text vectors, all written with enough digits to
round-trip float64 exactly.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
from scipy.io import mmread, mmwrite

from .errors import BadShape, ParseError
from .problem import BallConstrained, BoxLasso, ProblemInstance

MANIFEST_NAME = "manifest.json"
MANIFEST_SCHEMA_VERSION = 1

_STREAMS = ("matrix", "support", "signal", "noise")


def rng_streams(seed):
    """The four named independent Philox streams for a given seed."""
    return {
        name: np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(i,)))
        )
        for i, name in enumerate(_STREAMS)
    }


def derive_seed(master_seed, label, rep):
    """Stable 63-bit per-instance seed from (master seed, cell label, rep).

    sha256 over the formatted triple; documented so a whole benchmark is
    reproducible from one seed.
    """
    digest = hashlib.sha256(f"{master_seed}|{label}|{rep}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def gen_instance(m, n, s, seed, variant="box_lasso", lam=0.1, nf=1.2, bound=5.0):
    """Generate one instance plus its ground-truth sparse signal.

    Returns (ProblemInstance, x_orig).  Identical arguments give a bitwise
    identical instance.
    """
    if not (m >= 1 and n >= 1 and 1 <= s <= n):
        raise BadShape(f"need m >= 1, n >= 1, 1 <= s <= n; got {(m, n, s)}")
    streams = rng_streams(seed)
    A = streams["matrix"].standard_normal((m, n))
    support = streams["support"].choice(n, size=s, replace=False)
    x_orig = np.zeros(n)
    x_orig[support] = streams["signal"].standard_normal(s)
    noise = 0.01 * streams["noise"].standard_normal(m)
    b = A @ x_orig + noise
    if variant == "box_lasso":
        inst = ProblemInstance(
            A=A,
            b=b,
            variant=BoxLasso(
                lam=lam, lower=-bound * np.ones(n), upper=bound * np.ones(n)
            ),
        )
    elif variant == "ball_constrained":
        sigma = nf * float(np.linalg.norm(noise))
        inst = ProblemInstance(A=A, b=b, variant=BallConstrained(sigma=sigma))
    else:
        raise BadShape(f"unknown variant {variant!r}")
    return inst, x_orig


# ---------------------------------------------------------------------------
# file I/O


def _write_vector(path, v):
    with open(path, "w", encoding="utf-8") as fh:
        for val in np.asarray(v, dtype=float):
            fh.write(format(val, ".17g") + "\n")


def _read_vector(path):
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("%") or text.startswith("#"):
                continue
            try:
                vals.append(float(text))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: not a number: {text!r}") from exc
    return np.array(vals)


def save_instance(inst, out_dir, x_orig=None, seed=None):
    """Write an instance directory (manifest + matrix + vectors)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mmwrite(out / "A.mtx", inst.A, precision=17)
    _write_vector(out / "b.txt", inst.b)
    files = {"A": "A.mtx", "b": "b.txt"}
    params = {}
    v = inst.variant
    if isinstance(v, BoxLasso):
        _write_vector(out / "alpha.txt", v.lower)
        _write_vector(out / "beta.txt", v.upper)
        files["alpha"] = "alpha.txt"
        files["beta"] = "beta.txt"
        params["lambda"] = v.lam
    else:
        params["sigma"] = v.sigma
        if inst.x_feas is not None:
            _write_vector(out / "x_feas.txt", inst.x_feas)
            files["x_feas"] = "x_feas.txt"
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "variant": inst.variant_name,
        "m": inst.m,
        "n": inst.n,
        "params": params,
        "files": files,
    }
    if seed is not None:
        manifest["seed"] = seed
    if x_orig is not None:
        _write_vector(out / "x_orig.txt", x_orig)
        manifest["extras"] = {"x_orig": "x_orig.txt"}
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return out / MANIFEST_NAME


def load_instance(path):
    """Load an instance from a manifest path or its directory.

    Validates the model invariants on load; malformed files raise ParseError
    with file/line context, violated invariants raise InvariantViolation.
    """
    path = Path(path)
    manifest_path = path / MANIFEST_NAME if path.is_dir() else path
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{manifest_path}:{exc.lineno}:{exc.colno}: {exc.msg}"
        ) from exc
    base = manifest_path.parent
    files = manifest.get("files", {})
    if "A" not in files or "b" not in files:
        raise ParseError(f"{manifest_path}: manifest must name A and b files")
    try:
        raw = mmread(base / files["A"])
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{base / files['A']}: {exc}") from exc
    A = np.asarray(raw.todense() if hasattr(raw, "todense") else raw, dtype=float)
    b = _read_vector(base / files["b"])
    params = manifest.get("params", {})
    variant_name = manifest.get("variant")
    try:
        if variant_name == "box_lasso":
            lower = _read_vector(base / files["alpha"])
            upper = _read_vector(base / files["beta"])
            variant = BoxLasso(lam=float(params["lambda"]), lower=lower, upper=upper)
            x_feas = None
        elif variant_name == "ball_constrained":
            variant = BallConstrained(sigma=float(params["sigma"]))
            x_feas = (
                _read_vector(base / files["x_feas"]) if "x_feas" in files else None
            )
        else:
            raise ParseError(f"{manifest_path}: unknown variant {variant_name!r}")
    except KeyError as exc:
        raise ParseError(
            f"{manifest_path}: missing manifest entry {exc.args[0]!r}"
        ) from exc
    return ProblemInstance(A=A, b=b, variant=variant, x_feas=x_feas)
