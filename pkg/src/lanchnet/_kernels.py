"""Jitted kernels for the battle vector field and the RK4 loop.

The vector field is evaluated edge-wise: every manoeuvre flow is
computed once per link and scattered with opposite signs to its two
endpoints, which makes the per-side force sum exactly conserved in
floating point. The integration loop, including termination checks,
runs entirely inside numba so that topology-optimisation runs can
afford tens of thousands of battle integrations.

Status codes returned by the integration kernel:
    0  converged (vector field below term_tol, no combat decision)
    1  horizon   (t_max reached)
    2  blue combat force annihilated
    3  red combat force annihilated
    4  combat over with survivors on both sides (disjoint outcomes)
   -1  non-finite state (numerical abort)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import BattleConfig, Topology

STATUS_CONVERGED = 0
STATUS_HORIZON = 1
STATUS_BLUE_DEAD = 2
STATUS_RED_DEAD = 3
STATUS_MIXED_DEAD = 4
STATUS_NAN = -1

#: A side's combat node counts as destroyed below this resource level.
ANNIHILATION_TOL = 1e-3

#: After a combat decision, integration stops once the manoeuvre part of
#: the vector field falls below max(term_tol, EQUIL_TOL): the survivors'
#: reserves have equalised and only slow residual drip remains.
EQUIL_TOL = 1e-3

#: Hard cap (in time units) on the post-decision settling phase. Mean
#: forces are conserved by manoeuvre flows, so truncating the residual
#: drip does not affect battle outcomes, only per-node settling detail.
POST_ANNIHILATION_WINDOW = 25.0


@njit(cache=True)
def _rhs(B, R, be_i, be_j, re_i, re_j, en_b, en_r, inv_deg_b, inv_deg_r,
         kappa_b, kappa_r, gamma_b, gamma_r, eps_theta, eps_delta, floor,
         dB, dR, manB, manR):
    nb = B.shape[0]
    nr = R.shape[0]

    thB = np.empty(nb)
    thR = np.empty(nr)
    tfB = np.empty(nb)
    tfR = np.empty(nr)
    for i in range(nb):
        thB[i] = 0.5 * (1.0 + np.tanh(B[i] / eps_theta))
        tfB[i] = thB[i] if floor == 0.0 else 0.5 * (1.0 + np.tanh((B[i] - floor) / eps_theta))
    for m in range(nr):
        thR[m] = 0.5 * (1.0 + np.tanh(R[m] / eps_theta))
        tfR[m] = thR[m] if floor == 0.0 else 0.5 * (1.0 + np.tanh((R[m] - floor) / eps_theta))

    # engaged adversary strength, floored at zero (regulariser pole guard)
    sB = np.zeros(nb)
    sR = np.zeros(nr)
    for k in range(en_b.shape[0]):
        sB[en_b[k]] += R[en_r[k]]
        sR[en_r[k]] += B[en_b[k]]
    wB = np.empty(nb)
    wR = np.empty(nr)
    for i in range(nb):
        s = sB[i] if sB[i] > 0.0 else 0.0
        wB[i] = B[i] / (s + eps_delta)
    for m in range(nr):
        s = sR[m] if sR[m] > 0.0 else 0.0
        wR[m] = R[m] / (s + eps_delta)

    for i in range(nb):
        manB[i] = 0.0
        dB[i] = 0.0
    for m in range(nr):
        manR[m] = 0.0
        dR[m] = 0.0

    # manoeuvre: one flow per link, scattered antisymmetrically
    for k in range(be_i.shape[0]):
        i = be_i[k]
        j = be_j[k]
        f = gamma_b * (wB[i] - wB[j]) * tfB[i] * tfB[j]
        manB[i] -= f
        manB[j] += f
    for k in range(re_i.shape[0]):
        l = re_i[k]
        m = re_j[k]
        f = gamma_r * (wR[l] - wR[m]) * tfR[l] * tfR[m]
        manR[l] -= f
        manR[m] += f

    # attrition: each attacker's fire is split over its own target count
    for k in range(en_b.shape[0]):
        i = en_b[k]
        m = en_r[k]
        dB[i] -= kappa_r * R[m] * thR[m] * inv_deg_r[m] * thB[i]
        dR[m] -= kappa_b * B[i] * thB[i] * inv_deg_b[i] * thR[m]

    for i in range(nb):
        dB[i] += manB[i]
    for m in range(nr):
        dR[m] += manR[m]


@njit(cache=True)
def _integrate(B, R, be_i, be_j, re_i, re_j, en_b, en_r, inv_deg_b, inv_deg_r,
               kappa_b, kappa_r, gamma_b, gamma_r, eps_theta, eps_delta, floor,
               dt, n_steps, term_tol, equil_tol, ann_tol, post_window_steps,
               stride, rec_t, rec_B, rec_R):
    nb = B.shape[0]
    nr = R.shape[0]
    n_eng = en_b.shape[0]

    k1B = np.empty(nb); k1R = np.empty(nr)
    k2B = np.empty(nb); k2R = np.empty(nr)
    k3B = np.empty(nb); k3R = np.empty(nr)
    k4B = np.empty(nb); k4R = np.empty(nr)
    mB = np.empty(nb); mR = np.empty(nr)
    junkB = np.empty(nb); junkR = np.empty(nr)

    # manoeuvre conserves and attrition destroys, so any state far beyond
    # the initial totals is a numerical blow-up even if still finite
    total0 = 0.0
    for i in range(nb):
        total0 += abs(B[i])
    total_r = 0.0
    for m in range(nr):
        total_r += abs(R[m])
    if total_r > total0:
        total0 = total_r
    blow_up_bound = 10.0 * (1.0 + total0)

    n_rec = 0
    rec_t[n_rec] = 0.0
    for i in range(nb):
        rec_B[n_rec, i] = B[i]
    for m in range(nr):
        rec_R[n_rec, m] = R[m]
    n_rec += 1

    status = -2
    ann_status = 0
    ann_step = -1
    step = 0
    while step < n_steps:
        _rhs(B, R, be_i, be_j, re_i, re_j, en_b, en_r, inv_deg_b, inv_deg_r,
             kappa_b, kappa_r, gamma_b, gamma_r, eps_theta, eps_delta, floor,
             k1B, k1R, mB, mR)

        if ann_status == 0:
            if n_eng > 0:
                live = False
                for k in range(n_eng):
                    if B[en_b[k]] > ann_tol and R[en_r[k]] > ann_tol:
                        live = True
                        break
                if not live:
                    blue_max = -1.0e300
                    red_max = -1.0e300
                    for k in range(n_eng):
                        if B[en_b[k]] > blue_max:
                            blue_max = B[en_b[k]]
                        if R[en_r[k]] > red_max:
                            red_max = R[en_r[k]]
                    blue_dead = blue_max <= ann_tol
                    red_dead = red_max <= ann_tol
                    if blue_dead and red_dead:
                        ann_status = STATUS_BLUE_DEAD if blue_max <= red_max else STATUS_RED_DEAD
                    elif blue_dead:
                        ann_status = STATUS_BLUE_DEAD
                    elif red_dead:
                        ann_status = STATUS_RED_DEAD
                    else:
                        ann_status = STATUS_MIXED_DEAD
                    ann_step = step
            if ann_status == 0 and term_tol > 0.0:
                worst = 0.0
                for i in range(nb):
                    a = abs(k1B[i])
                    if a > worst:
                        worst = a
                for m in range(nr):
                    a = abs(k1R[m])
                    if a > worst:
                        worst = a
                if worst < term_tol:
                    status = STATUS_CONVERGED
                    break

        if ann_status != 0:
            worst = 0.0
            for i in range(nb):
                a = abs(mB[i])
                if a > worst:
                    worst = a
            for m in range(nr):
                a = abs(mR[m])
                if a > worst:
                    worst = a
            if worst < equil_tol or step - ann_step >= post_window_steps:
                status = ann_status
                break

        _rhs(B + (0.5 * dt) * k1B, R + (0.5 * dt) * k1R,
             be_i, be_j, re_i, re_j, en_b, en_r, inv_deg_b, inv_deg_r,
             kappa_b, kappa_r, gamma_b, gamma_r, eps_theta, eps_delta, floor,
             k2B, k2R, junkB, junkR)
        _rhs(B + (0.5 * dt) * k2B, R + (0.5 * dt) * k2R,
             be_i, be_j, re_i, re_j, en_b, en_r, inv_deg_b, inv_deg_r,
             kappa_b, kappa_r, gamma_b, gamma_r, eps_theta, eps_delta, floor,
             k3B, k3R, junkB, junkR)
        _rhs(B + dt * k3B, R + dt * k3R,
             be_i, be_j, re_i, re_j, en_b, en_r, inv_deg_b, inv_deg_r,
             kappa_b, kappa_r, gamma_b, gamma_r, eps_theta, eps_delta, floor,
             k4B, k4R, junkB, junkR)
        for i in range(nb):
            B[i] = B[i] + (dt / 6.0) * (k1B[i] + 2.0 * k2B[i] + 2.0 * k3B[i] + k4B[i])
        for m in range(nr):
            R[m] = R[m] + (dt / 6.0) * (k1R[m] + 2.0 * k2R[m] + 2.0 * k3R[m] + k4R[m])
        step += 1

        finite = True
        for i in range(nb):
            if not np.isfinite(B[i]) or abs(B[i]) > blow_up_bound:
                finite = False
        for m in range(nr):
            if not np.isfinite(R[m]) or abs(R[m]) > blow_up_bound:
                finite = False
        if not finite:
            status = STATUS_NAN
            break

        if step % stride == 0 and step < n_steps:
            rec_t[n_rec] = step * dt
            for i in range(nb):
                rec_B[n_rec, i] = B[i]
            for m in range(nr):
                rec_R[n_rec, m] = R[m]
            n_rec += 1

    if status == -2:
        status = ann_status if ann_status != 0 else STATUS_HORIZON

    t_final = step * dt
    if rec_t[n_rec - 1] != t_final:
        rec_t[n_rec] = t_final
        for i in range(nb):
            rec_B[n_rec, i] = B[i]
        for m in range(nr):
            rec_R[n_rec, m] = R[m]
        n_rec += 1

    return status, step, n_rec, ann_step


@dataclass(frozen=True)
class Workspace:
    """Edge-array form of a Topology, ready for the kernels."""

    n_blue: int
    n_red: int
    be_i: np.ndarray
    be_j: np.ndarray
    re_i: np.ndarray
    re_j: np.ndarray
    en_b: np.ndarray
    en_r: np.ndarray
    deg_b: np.ndarray
    deg_r: np.ndarray
    inv_deg_b: np.ndarray
    inv_deg_r: np.ndarray

    @staticmethod
    def build(topo: Topology) -> "Workspace":
        be = np.argwhere(np.triu(topo.blue_manoeuvre))
        re = np.argwhere(np.triu(topo.red_manoeuvre))
        en = np.argwhere(topo.engagement)
        deg_b = topo.engagement.sum(axis=1).astype(np.float64)
        deg_r = topo.engagement.sum(axis=0).astype(np.float64)
        with np.errstate(divide="ignore"):
            inv_deg_b = np.where(deg_b > 0, 1.0 / np.maximum(deg_b, 1.0), 1.0)
            inv_deg_r = np.where(deg_r > 0, 1.0 / np.maximum(deg_r, 1.0), 1.0)
        return Workspace(
            n_blue=topo.n_blue,
            n_red=topo.n_red,
            be_i=np.ascontiguousarray(be[:, 0]),
            be_j=np.ascontiguousarray(be[:, 1]),
            re_i=np.ascontiguousarray(re[:, 0]),
            re_j=np.ascontiguousarray(re[:, 1]),
            en_b=np.ascontiguousarray(en[:, 0]),
            en_r=np.ascontiguousarray(en[:, 1]),
            deg_b=deg_b,
            deg_r=deg_r,
            inv_deg_b=inv_deg_b,
            inv_deg_r=inv_deg_r,
        )

    def rhs(self, B: np.ndarray, R: np.ndarray, config: BattleConfig):
        """Evaluate the vector field; returns (dB, dR, manB, manR)."""
        dB = np.empty(self.n_blue)
        dR = np.empty(self.n_red)
        manB = np.empty(self.n_blue)
        manR = np.empty(self.n_red)
        _rhs(
            np.asarray(B, dtype=float), np.asarray(R, dtype=float),
            self.be_i, self.be_j, self.re_i, self.re_j, self.en_b, self.en_r,
            self.inv_deg_b, self.inv_deg_r,
            config.kappa_B, config.kappa_R, config.gamma_B, config.gamma_R,
            config.eps_theta, config.eps_delta, config.theta_floor,
            dB, dR, manB, manR,
        )
        return dB, dR, manB, manR

    def integrate(
        self,
        B0: np.ndarray,
        R0: np.ndarray,
        config: BattleConfig,
        n_steps: int,
        term_tol: float,
        equil_tol: float,
        annihilation_tol: float,
        stride: int,
        post_window_steps: int | None = None,
    ):
        """Run the RK4 loop; returns (status, steps, times, blues, reds, ann_step)."""
        if post_window_steps is None:
            post_window_steps = max(1, int(round(POST_ANNIHILATION_WINDOW / config.dt)))
        n_rec_max = n_steps // stride + 3
        rec_t = np.empty(n_rec_max)
        rec_B = np.empty((n_rec_max, self.n_blue))
        rec_R = np.empty((n_rec_max, self.n_red))
        B = np.array(B0, dtype=float)
        R = np.array(R0, dtype=float)
        status, steps, n_rec, ann_step = _integrate(
            B, R,
            self.be_i, self.be_j, self.re_i, self.re_j, self.en_b, self.en_r,
            self.inv_deg_b, self.inv_deg_r,
            config.kappa_B, config.kappa_R, config.gamma_B, config.gamma_R,
            config.eps_theta, config.eps_delta, config.theta_floor,
            config.dt, n_steps, term_tol, equil_tol, annihilation_tol,
            post_window_steps, stride,
            rec_t, rec_B, rec_R,
        )
        return status, steps, rec_t[:n_rec], rec_B[:n_rec], rec_R[:n_rec], ann_step
