"""Benchmark kernels: programs, input generators and reference gradients."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Optional

from .driver import load
from .syntax import Expr


@dataclass
class BenchKernel:
    name: str
    source: str
    wrt: str
    inputs: Callable[[int, random.Random], list]
    oracle: Optional[Callable] = None   # closed-form derivative; None means FD only
    default_size: int = 8
    max_size: int = 1024

    @property
    def program(self) -> Expr:
        return load(self.source)

    def param_index(self) -> int:
        from .driver import signature
        names = [p for p, _ in signature(self.program)[0]]
        return names.index(self.wrt)


def uniform_vector(n: int, rng: random.Random, lo=-1.0, hi=1.0) -> list:
    return [rng.uniform(lo, hi) for _ in range(n)]


def uniform_matrix(r: int, c: int, rng: random.Random, lo=-1.0, hi=1.0) -> list:
    return [[rng.uniform(lo, hi) for _ in range(c)] for _ in range(r)]


def distinct_vector(n: int, rng: random.Random) -> list:
    """Values in [-1, 1] at least 1/n apart (no ties): a jittered grid, shuffled."""
    step = 2.0 / n
    v = [-1.0 + step * (k + 0.5) + rng.uniform(-0.25, 0.25) * step for k in range(n)]
    rng.shuffle(v)
    return v


# --------------------------------------------------------------------------- #
# programs

DOT = "fun (v1: Vector) (v2: Vector) -> vectorDot v1 v2"

MAX = "fun (v: Vector) -> ifold (fun s i -> if v[i] > s then v[i] else s) v[0] (length v)"

ADD = "fun (v1: Vector) (v2: Vector) -> vectorAdd v1 v2"

SMUL = "fun (v: Vector) (s: Double) -> vectorSMul v s"

LSE = """fun (v: Vector) ->
  let m = ifold (fun s i -> if v[i] > s then v[i] else s) v[0] (length v) in
  log (vectorSum (vectorMap v (fun x -> exp (x - m)))) + m"""

# Itakura-Saito style likelihood of A under the factorization W H
NNMF = """fun (W: Matrix) (H: Matrix) (A: Matrix) ->
  let X = matrixMul W H in
  ifold (fun s i -> s + ifold (fun t j -> t + (log X[i][j] + A[i][j] / X[i][j])) 0.0 (length X[i]))
    0.0 (length X)"""

# w = r(3) C(3) f x0(2) k(2) followed by 3 coordinates per point
PROJECT = """fun (w: Vector) ->
  let n = (length w - 11) / 3 in
  build (2 * n) (fun t ->
    let p = t / 2 in
    let b = 11 + 3 * p in
    let y0 = w[b] - w[3] in
    let y1 = w[b + 1] - w[4] in
    let y2 = w[b + 2] - w[5] in
    let theta = sqrt (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) in
    let small = theta < 0.000000000001 in
    let v0 = w[0] / theta in
    let v1 = w[1] / theta in
    let v2 = w[2] / theta in
    let c = cos theta in
    let sn = sin theta in
    let vy = (v0 * y0 + v1 * y1 + v2 * y2) * (1.0 - c) in
    let z0 = if small then y0 else y0 * c + (v1 * y2 - v2 * y1) * sn + v0 * vy in
    let z1 = if small then y1 else y1 * c + (v2 * y0 - v0 * y2) * sn + v1 * vy in
    let z2 = if small then y2 else y2 * c + (v0 * y1 - v1 * y0) * sn + v2 * vy in
    let q0 = z0 / z2 in
    let q1 = z1 / z2 in
    let r2 = q0 * q0 + q1 * q1 in
    let scale = 1.0 + w[9] * r2 + w[10] * r2 * r2 in
    if t - 2 * p == 0 then q0 * scale * w[6] + w[7] else q1 * scale * w[6] + w[8])"""


# --------------------------------------------------------------------------- #
# reference derivatives, indexed [input component][output component]

def _dot_oracle(v1, v2):
    return list(v2)


def _add_oracle(v1, v2):
    n = len(v1)
    return [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]


def _smul_oracle(v, s):
    n = len(v)
    return [[s if i == j else 0.0 for j in range(n)] for i in range(n)]


def _max_oracle(v):
    k = max(range(len(v)), key=lambda i: v[i])
    return [1.0 if i == k else 0.0 for i in range(len(v))]


def _lse_oracle(v):
    m = max(v)
    ex = [math.exp(x - m) for x in v]
    s = sum(ex)
    return [x / s for x in ex]


def nnmf_closed_form(W, H, A):
    """dD/dH = W^T (1/(WH) - A/(WH)^2)."""
    r, k, c = len(W), len(H), len(H[0])
    X = [[sum(W[i][p] * H[p][j] for p in range(k)) for j in range(c)] for i in range(r)]
    G = [[1.0 / X[i][j] - A[i][j] / (X[i][j] * X[i][j]) for j in range(c)] for i in range(r)]
    return [[sum(W[i][p] * G[i][j] for i in range(r)) for j in range(c)] for p in range(k)]


def project_reference(w: list) -> list:
    """Direct Python evaluation of the projection, used by tests as a primal oracle."""
    n = (len(w) - 11) // 3
    r, C, f, x0, k = w[0:3], w[3:6], w[6], w[7:9], w[9:11]
    theta = math.sqrt(sum(x * x for x in r))
    out = []
    for p in range(n):
        X = w[11 + 3 * p: 14 + 3 * p]
        y = [X[i] - C[i] for i in range(3)]
        if theta < 1e-12:
            z = y
        else:
            v = [x / theta for x in r]
            cross = [v[1] * y[2] - v[2] * y[1], v[2] * y[0] - v[0] * y[2], v[0] * y[1] - v[1] * y[0]]
            vy = sum(v[i] * y[i] for i in range(3)) * (1 - math.cos(theta))
            z = [y[i] * math.cos(theta) + cross[i] * math.sin(theta) + v[i] * vy for i in range(3)]
        q = [z[0] / z[2], z[1] / z[2]]
        r2 = q[0] ** 2 + q[1] ** 2
        scale = 1 + k[0] * r2 + k[1] * r2 * r2
        out += [q[0] * scale * f + x0[0], q[1] * scale * f + x0[1]]
    return out


# --------------------------------------------------------------------------- #
# input generators

def _pair_vectors(n, rng):
    return [uniform_vector(n, rng), uniform_vector(n, rng)]


def _smul_inputs(n, rng):
    return [uniform_vector(n, rng), rng.uniform(-1, 1)]


def _nnmf_inputs(n, rng):
    return [uniform_matrix(n, n, rng, 0.1, 2.0) for _ in range(3)]


def _project_inputs(n, rng):
    # unit-norm rotation vector, camera in front of the points
    r = uniform_vector(3, rng)
    norm = math.sqrt(sum(x * x for x in r)) or 1.0
    r = [x / norm for x in r]
    C = uniform_vector(3, rng, -0.2, 0.2)
    f = rng.uniform(0.5, 2.0)
    x0 = uniform_vector(2, rng)
    k = uniform_vector(2, rng, -0.1, 0.1)
    pts = []
    for _ in range(n):
        # place the point so that its rotated depth is comfortably positive
        while True:
            X = [rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(3, 6)]
            if abs(_depth(r, C, X)) > 1.0:
                pts += X
                break
    return [r + C + [f] + x0 + k + pts]


def _depth(r, C, X):
    theta = math.sqrt(sum(x * x for x in r))
    v = [x / theta for x in r]
    y = [X[i] - C[i] for i in range(3)]
    vy = sum(v[i] * y[i] for i in range(3)) * (1 - math.cos(theta))
    return y[2] * math.cos(theta) + (v[0] * y[1] - v[1] * y[0]) * math.sin(theta) + v[2] * vy


KERNELS = {
    "dot-grad": BenchKernel("dot-grad", DOT, "v1", _pair_vectors, _dot_oracle, 8, 1024),
    "max-grad": BenchKernel("max-grad", MAX, "v", lambda n, rng: [distinct_vector(n, rng)],
                            _max_oracle, 8, 1024),
    "add-jacob": BenchKernel("add-jacob", ADD, "v1", _pair_vectors, _add_oracle, 8, 256),
    "smul-jacob": BenchKernel("smul-jacob", SMUL, "v", _smul_inputs, _smul_oracle, 8, 256),
    "lse": BenchKernel("lse", LSE, "v", lambda n, rng: [uniform_vector(n, rng)], _lse_oracle,
                       100, 1024),
    "nnmf": BenchKernel("nnmf", NNMF, "H", _nnmf_inputs, nnmf_closed_form, 8, 8),
    "ba-project": BenchKernel("ba-project", PROJECT, "w", _project_inputs, None, 8, 8),
}
