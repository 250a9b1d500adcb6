"""Alternating minimization for the glocal objective.

The training objective over U (l x k), V (k x n), W (d x k) and one
unit-row factor Z_m per instance group is

    || J o (Y - U V) ||_F^2
  + lambda  * || V - W' X ||_F^2
  + lambda2 * (||U||_F^2 + ||V||_F^2 + ||W||_F^2)
  + sum_m [ (lambda3 * n_m / n) * tr(F0' Z_m Z_m' F0)
            + lambda4 * tr(F_m' Z_m Z_m' F_m) ]        s.t. diag(Z_m Z_m') = 1

with J the observation indicator, F0 = U W' X the classifier outputs on
all instances and F_m its restriction to group m.  Each outer iteration
updates the blocks in the order Z_1..Z_g, V, U, W.  Z updates are
projected gradient steps (rows rescaled to unit norm, a step is kept
only if the projected point does not increase the restricted
objective).  U and W take backtracking gradient steps on the full
objective; V is solved in closed form per instance column while
k <= 256 and falls back to gradient steps above that.

Optimization starts from a warm start: the same alternating scheme with
lambda3 = lambda4 = 0 (no correlation terms), after which randomly
initialized unit-row factors are attached.  All products are ordered so
that no l x l or n x n intermediate is formed; correlation quadratic
forms go through ||Z' F||_F^2.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .correlation import factored_trace, init_factor, project_unit_rows
from .model import GlocalModel

# line search: initial step, shrink factor, sufficient-decrease
# constant, and the number of halvings before a step is given up
_STEP0 = 1.0
_SHRINK = 0.5
_ARMIJO_C = 1e-4
_MAX_BACKTRACKS = 30

# above this latent dimension the per-column closed-form V solves get
# replaced by gradient steps
_CLOSED_FORM_MAX_K = 256


@dataclass(frozen=True, eq=False)
class ObjectiveContext:
    """Fixed problem data shared by objective/gradient evaluations."""

    Y: np.ndarray  # l x n observed labels as float (-1, 0, +1)
    J: np.ndarray  # l x n observation indicator as float (0/1)
    X: np.ndarray  # d x n features
    groups: tuple  # g arrays of 0-based instance indices
    n: int
    hp: "Hyperparams"


def make_context(dataset, partition, hp):
    """Bundle a dataset, a partition and hyperparams for the solver."""
    if partition.n != dataset.n:
        raise ValueError(
            f"partition covers {partition.n} instances, dataset has {dataset.n}"
        )
    return ObjectiveContext(
        Y=dataset.labels.values.astype(np.float64),
        J=dataset.labels.indicator,
        X=dataset.features.values,
        groups=tuple(partition.groups()),
        n=dataset.n,
        hp=hp,
    )


def _sumsq(A):
    return float(np.einsum("ij,ij->", A, A))


def _objective_arrays(U, V, W, Zs, ctx):
    hp = ctx.hp
    with np.errstate(over="ignore", invalid="ignore"):
        R = ctx.J * (U @ V - ctx.Y)
        val = _sumsq(R)
        D = V - W.T @ ctx.X
        val += hp.lambda_ * _sumsq(D)
        val += hp.lambda2 * (_sumsq(U) + _sumsq(V) + _sumsq(W))
        if hp.lambda3 != 0.0 or hp.lambda4 != 0.0:
            F0 = U @ (W.T @ ctx.X)
            for m, idx in enumerate(ctx.groups):
                w3 = hp.lambda3 * idx.size / ctx.n
                val += w3 * factored_trace(Zs[m], F0)
                val += hp.lambda4 * factored_trace(Zs[m], F0[:, idx])
    return val


def objective(model, ctx):
    """Full objective value at the model's parameter blocks."""
    return _objective_arrays(model.U, model.V, model.W, model.factors, ctx)


def _grad_V(U, V, W, ctx):
    hp = ctx.hp
    E = ctx.J * (U @ V - ctx.Y)
    return 2.0 * (U.T @ E) + 2.0 * hp.lambda_ * (V - W.T @ ctx.X) + 2.0 * hp.lambda2 * V


def _group_quadratics(W, ctx):
    # B0 = W'XX'W and one B_m = W'X_m X_m'W per group, all k x k
    XtW = ctx.X.T @ W
    B0 = XtW.T @ XtW
    Bs = [XtW[idx].T @ XtW[idx] for idx in ctx.groups]
    return B0, Bs


def _grad_U(U, V, W, Zs, ctx):
    hp = ctx.hp
    E = ctx.J * (U @ V - ctx.Y)
    G = 2.0 * (E @ V.T) + 2.0 * hp.lambda2 * U
    if hp.lambda3 != 0.0 or hp.lambda4 != 0.0:
        B0, Bs = _group_quadratics(W, ctx)
        for m, idx in enumerate(ctx.groups):
            w3 = hp.lambda3 * idx.size / ctx.n
            C = w3 * B0 + hp.lambda4 * Bs[m]
            G += 2.0 * Zs[m] @ ((Zs[m].T @ U) @ C)
    return G


def _grad_W(U, V, W, Zs, ctx):
    hp = ctx.hp
    XtW = ctx.X.T @ W
    G = 2.0 * hp.lambda_ * (ctx.X @ (XtW - V.T)) + 2.0 * hp.lambda2 * W
    if hp.lambda3 != 0.0 or hp.lambda4 != 0.0:
        for m, idx in enumerate(ctx.groups):
            ZtU = Zs[m].T @ U
            WM = W @ (ZtU.T @ ZtU)
            w3 = hp.lambda3 * idx.size / ctx.n
            Xm = ctx.X[:, idx]
            G += 2.0 * (w3 * (ctx.X @ (ctx.X.T @ WM)) + hp.lambda4 * (Xm @ (Xm.T @ WM)))
    return G


def _grad_Z(U, C, Z):
    # gradient of the unconstrained restricted objective at Z, with
    # C = (lambda3 n_m / n) B0 + lambda4 B_m
    return 2.0 * U @ (C @ (U.T @ Z))


def gradients(model, ctx):
    """Analytic gradients of the full objective.

    Args:
        model: GlocalModel giving the evaluation point.
        ctx: ObjectiveContext.

    Returns:
        (G_U, G_V, G_W, G_Zs) where G_Zs is a tuple with one l x k
        gradient per group factor, taken without the unit-row
        constraint.
    """
    U, V, W, Zs = model.U, model.V, model.W, model.factors
    hp = ctx.hp
    G_U = _grad_U(U, V, W, Zs, ctx)
    G_V = _grad_V(U, V, W, ctx)
    G_W = _grad_W(U, V, W, Zs, ctx)
    B0, Bs = _group_quadratics(W, ctx)
    G_Zs = []
    for m, idx in enumerate(ctx.groups):
        w3 = hp.lambda3 * idx.size / ctx.n
        C = w3 * B0 + hp.lambda4 * Bs[m]
        G_Zs.append(_grad_Z(U, C, Zs[m]))
    return G_U, G_V, G_W, tuple(G_Zs)


def _closed_form_V(U, W, ctx):
    hp = ctx.hp
    k = U.shape[1]
    # per column i: (U' Diag(j_i) U + (lambda+lambda2) I) v_i
    #             = lambda W'x_i + U' Diag(j_i) y_i
    A = np.einsum("li,ln,lj->nij", U, ctx.J, U)
    A[:, np.arange(k), np.arange(k)] += hp.lambda_ + hp.lambda2
    B = (hp.lambda_ * (W.T @ ctx.X) + U.T @ (ctx.J * ctx.Y)).T  # n x k
    sol = np.linalg.solve(A, B[:, :, None])[:, :, 0]
    return sol.T.copy()


def closed_form_V(model, ctx):
    """Exact minimizer of the objective in V with all other blocks fixed."""
    return _closed_form_V(model.U, model.W, ctx)


def _descend_block(x0, f0, grad_fn, obj_fn, steps):
    # backtracking gradient descent on one block; returns the new
    # block, its objective value and the accepted step sizes
    x, f_x = x0, f0
    accepted = []
    for _ in range(steps):
        G = grad_fn(x)
        gnorm2 = _sumsq(G)
        if gnorm2 == 0.0:
            break
        t = _STEP0
        ok = False
        for _ in range(_MAX_BACKTRACKS + 1):
            cand = x - t * G
            f_new = obj_fn(cand)
            if f_new <= f_x - _ARMIJO_C * t * gnorm2:
                x, f_x, ok = cand, f_new, True
                accepted.append(t)
                break
            t *= _SHRINK
        if not ok:
            break
    return x, f_x, accepted


def _z_descend(U, W, Z0, ctx, m, steps):
    # projected gradient steps on the restricted objective
    #   h(Z) = (lambda3 n_m/n) ||Z'F0||^2 + lambda4 ||Z'F_m||^2
    # a step is kept only if the projected point does not increase h
    hp = ctx.hp
    idx = ctx.groups[m]
    w3 = hp.lambda3 * idx.size / ctx.n
    XtW = ctx.X.T @ W
    B0 = XtW.T @ XtW
    Bm = XtW[idx].T @ XtW[idx]
    C = w3 * B0 + hp.lambda4 * Bm
    F0 = U @ XtW.T
    Fm = F0[:, idx]

    def h(Z):
        return w3 * factored_trace(Z, F0) + hp.lambda4 * factored_trace(Z, Fm)

    Z, h_val = Z0, h(Z0)
    accepted = []
    for _ in range(steps):
        G = _grad_Z(U, C, Z)
        if _sumsq(G) == 0.0:
            break
        t = _STEP0
        ok = False
        for _ in range(_MAX_BACKTRACKS + 1):
            cand = project_unit_rows(Z - t * G)
            h_new = h(cand)
            if h_new <= h_val:
                Z, h_val, ok = cand, h_new, True
                accepted.append(t)
                break
            t *= _SHRINK
        if not ok:
            break
    return Z, accepted


def update_Z_step(model, ctx, m, steps=1):
    """Projected gradient update of group factor m, other blocks fixed.

    Returns the updated l x k factor; rows stay unit-norm and the
    restricted objective never increases.  With lambda3 = lambda4 = 0
    the gradient vanishes and the factor is returned unchanged.
    """
    Z, _ = _z_descend(model.U, model.W, model.factors[m], ctx, m, steps)
    return Z


def _unit_row_error(Zs):
    err = 0.0
    for Z in Zs:
        err = max(err, float(np.abs(np.einsum("ij,ij->i", Z, Z) - 1.0).max()))
    return err


def _sweep(U, V, W, Zs, ctx):
    # one outer iteration: Z_1..Z_g, then V, then U, then W
    hp = ctx.hp
    steps = {}
    z_err = 0.0
    z_steps = []
    for m in range(len(ctx.groups)):
        Zs[m], acc = _z_descend(U, W, Zs[m], ctx, m, hp.inner_steps)
        z_steps.extend(acc)
        z_err = max(z_err, _unit_row_error([Zs[m]]))
    steps["Z"] = tuple(z_steps)

    if hp.k <= _CLOSED_FORM_MAX_K:
        V = _closed_form_V(U, W, ctx)
        steps["V"] = ()
    else:
        f_cur = _objective_arrays(U, V, W, Zs, ctx)
        V, _, acc = _descend_block(
            V,
            f_cur,
            lambda V_: _grad_V(U, V_, W, ctx),
            lambda V_: _objective_arrays(U, V_, W, Zs, ctx),
            hp.inner_steps,
        )
        steps["V"] = tuple(acc)

    f_cur = _objective_arrays(U, V, W, Zs, ctx)
    U, f_cur, acc = _descend_block(
        U,
        f_cur,
        lambda U_: _grad_U(U_, V, W, Zs, ctx),
        lambda U_: _objective_arrays(U_, V, W, Zs, ctx),
        hp.inner_steps,
    )
    steps["U"] = tuple(acc)

    W, f_cur, acc = _descend_block(
        W,
        f_cur,
        lambda W_: _grad_W(U, V, W_, Zs, ctx),
        lambda W_: _objective_arrays(U, V, W_, Zs, ctx),
        hp.inner_steps,
    )
    steps["W"] = tuple(acc)
    return U, V, W, Zs, steps, z_err


@dataclass(frozen=True)
class TraceRecord:
    """One outer iteration: objective, accepted steps, factor drift."""

    iteration: int
    objective: float
    steps: dict
    z_unit_error: float


@dataclass(frozen=True)
class FitTrace:
    """Per-iteration records of a fit; record 0 is the warm-start point."""

    records: tuple
    converged: bool

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])

    @property
    def total_iterations(self):
        return self.records[-1].iteration

    def to_csv(self, comments=()):
        lines = [f"# {c}" for c in comments]
        lines.append("iter,objective")
        for r in self.records:
            lines.append(f"{r.iteration},{r.objective:.17g}")
        return "\n".join(lines) + "\n"


def warm_start(ctx):
    """Initial model: alternating minimization without correlation terms.

    U, V, W start from seeded gaussian noise and are refined for
    hp.warm_iters iterations of the usual block updates with
    lambda3 = lambda4 = 0.  Unit-row factors (seeded per group) are
    attached untouched, ready for the full objective.

    Args:
        ctx: ObjectiveContext carrying data and hyperparams.

    Returns:
        GlocalModel.
    """
    hp = ctx.hp
    l, n = ctx.Y.shape
    d = ctx.X.shape[0]
    k = hp.k
    rng = np.random.default_rng(hp.seed)
    scale = 1.0 / np.sqrt(k)
    U = rng.standard_normal((l, k)) * scale
    W = rng.standard_normal((d, k)) * scale
    V = rng.standard_normal((k, n)) * scale
    Zs = [init_factor(l, k, hp.seed + m + 1) for m in range(len(ctx.groups))]

    plain_hp = dataclasses.replace(hp, lambda3=0.0, lambda4=0.0)
    plain_ctx = dataclasses.replace(ctx, hp=plain_hp)
    for _ in range(hp.warm_iters):
        U, V, W, Zs, _, _ = _sweep(U, V, W, Zs, plain_ctx)
    return GlocalModel(U=U, V=V, W=W, factors=tuple(Zs))


def fit(dataset, partition, hp):
    """Train a model by warm start plus alternating minimization.

    Args:
        dataset: training Dataset (labels may be partially observed).
        partition: instance Partition defining the local groups.
        hp: Hyperparams.

    Returns:
        (GlocalModel, FitTrace).  The trace's objective sequence is
        non-increasing; iteration stops after hp.outer_iters sweeps or
        once the relative objective change drops below hp.tol.
    """
    ctx = make_context(dataset, partition, hp)
    start = warm_start(ctx)
    U, V, W = start.U.copy(), start.V.copy(), start.W.copy()
    Zs = [Z.copy() for Z in start.factors]

    f = _objective_arrays(U, V, W, Zs, ctx)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the warm-start point")
    records = [TraceRecord(0, f, {}, _unit_row_error(Zs))]
    converged = False
    for it in range(1, hp.outer_iters + 1):
        U, V, W, Zs, steps, z_err = _sweep(U, V, W, Zs, ctx)
        f_new = _objective_arrays(U, V, W, Zs, ctx)
        records.append(TraceRecord(it, f_new, steps, z_err))
        rel = (f - f_new) / max(f, 1e-30)
        f = f_new
        if rel < hp.tol:
            converged = True
            break
    model = GlocalModel(U=U, V=V, W=W, factors=tuple(Zs))
    return model, FitTrace(records=tuple(records), converged=converged)
