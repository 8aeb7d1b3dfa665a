"""DDPM noise schedule with a respaced (strided) step plan.

The full schedule has T steps with linear betas; denoising visits a
descending subset (every `stride` steps) and the final transition lands
on t = 0.  For a jump from visited t down to its successor `next`, the
effective beta is 1 - abar(t)/abar(next), which makes one strided
transition algebraically identical to composing the skipped unit steps.
Each visited step also carries a resampling count and a scope (all-views
or right-only) driving the frame-matrix passes.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidRange

SCOPE_ALL = "all-views"
SCOPE_RIGHT = "right-only"


@dataclass(frozen=True)
class NoiseSchedule:
    """Betas over 1..T plus the visited-step plan.

    beta[i] and alpha_bar[i] belong to timestep i+1; abar(0) is defined
    as 1 so t = 0 means "fully denoised".
    """

    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray
    step_plan: tuple
    resample_plan: dict

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        abar = np.asarray(self.alpha_bar, dtype=np.float64)
        if beta.shape != (self.T,) or abar.shape != (self.T,):
            raise InvalidRange("beta/alpha_bar must have length T")
        if not ((beta > 0) & (beta < 1)).all():
            raise InvalidRange("betas must lie in (0, 1)")
        if not (np.diff(abar) < 0).all():
            raise InvalidRange("alpha_bar must be strictly decreasing")
        plan = tuple(int(t) for t in self.step_plan)
        if not plan or any(b >= a for a, b in zip(plan, plan[1:])):
            raise InvalidRange("step plan must be strictly decreasing")
        if plan[0] > self.T or plan[-1] < 1:
            raise InvalidRange("step plan must stay within [1, T]")
        if set(self.resample_plan) != set(plan):
            raise InvalidRange("resample plan must cover exactly the visited steps")
        beta.setflags(write=False)
        abar.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", abar)
        object.__setattr__(self, "step_plan", plan)
        object.__setattr__(self, "_succ", {
            t: (plan[i + 1] if i + 1 < len(plan) else 0)
            for i, t in enumerate(plan)})

    @property
    def steps(self):
        return len(self.step_plan)

    def abar(self, t: int) -> float:
        if t == 0:
            return 1.0
        return float(self.alpha_bar[t - 1])

    def next_step(self, t: int) -> int:
        """The level the transition from visited t descends to (0 last)."""
        if t not in self._succ:
            raise InvalidRange(f"t={t} is not a visited step")
        return self._succ[t]

    def jump_beta(self, t: int) -> float:
        """Effective beta of the strided transition leaving visited t."""
        return 1.0 - self.abar(t) / self.abar(self.next_step(t))

    def posterior_variance(self, t: int) -> float:
        """DDPM posterior variance of the strided transition leaving t."""
        nxt = self.next_step(t)
        return (1.0 - self.abar(nxt)) / (1.0 - self.abar(t)) * self.jump_beta(t)

    def scope(self, t: int) -> str:
        return self.resample_plan[t][1]

    def resamples(self, t: int) -> int:
        return self.resample_plan[t][0]


def make_schedule(T: int = 1000, steps: int = 50, beta_lo: float = 1e-4,
                  beta_hi: float = 0.02, resample_hi: int = 8,
                  resample_lo: int = 4,
                  right_only_second_half: bool = True) -> NoiseSchedule:
    """Linear betas with an evenly strided visited-step plan.

    The first half of the visited steps resample `resample_hi` times over
    all views; the second half `resample_lo` times over the right view
    only (set right_only_second_half=False to keep all views throughout).
    """
    if T < 1 or steps < 1 or steps > T:
        raise InvalidRange(f"need 1 <= steps <= T, got steps={steps} T={T}")
    if not (0 < beta_lo <= beta_hi < 1):
        raise InvalidRange(f"need 0 < beta_lo <= beta_hi < 1, got "
                           f"{beta_lo}, {beta_hi}")
    if resample_hi < 1 or resample_lo < 1:
        raise InvalidRange("resample counts must be positive")
    beta = np.linspace(beta_lo, beta_hi, T, dtype=np.float64)
    alpha_bar = np.cumprod(1.0 - beta)
    stride = max(1, round(T / steps))
    plan = []
    for k in range(steps):
        t = T - k * stride
        if t < 1:
            break
        plan.append(t)
    second = SCOPE_RIGHT if right_only_second_half else SCOPE_ALL
    half = len(plan) // 2
    resample_plan = {
        t: ((resample_hi, SCOPE_ALL) if i < half else (resample_lo, second))
        for i, t in enumerate(plan)}
    return NoiseSchedule(T, beta, alpha_bar, tuple(plan), resample_plan)
