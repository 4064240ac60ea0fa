"""Continuous relaxation of the best-edit problem.

a = softmax(alpha) lives on the simplex and every row p_i = softmax(m_i) of P
is a distribution over distractor cells, so the constraints hold by
construction. Gradient ascent maximizes

    J = g_c'((1 - a) ∘ F + a ∘ P F') - λa H(a) - λP Σ_i a_i H(p_i)

and the final (a, P) is rounded to one discrete edit. Excluded cells are
pinned with additive -1e9 logit masks so shapes never change.
"""
import logging
from typing import NamedTuple

import numpy as np

from explainer_app.exceptions import ExhaustedError
from explainer_app.features import check_same_geometry, single_edit
from explainer_app.models import RoundingRule
from explainer_app.nn.network import head_logprobs, head_logprobs_batch, head_value_and_gradient
from explainer_app.search.config import CandidateFilter, RelaxOptConfig

logger = logging.getLogger(__name__)

MASK_LOGIT = -1e9


def softmax(logits, axis=-1):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=axis, keepdims=True)


def _xlogx(p):
    return np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)


def _safe_log(p):
    return np.where(p > 0.0, np.log(np.where(p > 0.0, p, 1.0)), 0.0)


def entropy_penalty(p, axis=-1):
    """-Σ p ln p with 0 ln 0 = 0; a float for a vector, an array of row entropies otherwise."""
    entropy = -_xlogx(np.asarray(p, dtype=np.float64)).sum(axis=axis)
    return float(entropy) if np.ndim(entropy) == 0 else entropy


class RelaxedEdit(NamedTuple):
    query_cell:  int
    source_cell: int
    score:       float       # g_c' of the discrete single edit
    trajectory:  tuple       # objective value per optimization step


class RelaxedStep(NamedTuple):
    value: float             # objective J at this step
    a:     np.ndarray
    P:     np.ndarray


class RelaxedProblem:
    """The relaxed objective for one (F, F', c') instance and its analytic gradient."""

    def __init__(self, model, grid, distractor, target_class, excluded=CandidateFilter(), opt=RelaxOptConfig()):
        check_same_geometry(grid, distractor)
        self.model = model
        self.grid = grid
        self.distractor = distractor
        self.target_class = target_class
        self.opt = opt
        self.allowed = excluded.allowed(grid.cells)
        self.rows_allowed = self.allowed.any(axis=1)
        if not self.rows_allowed.any():
            raise ExhaustedError("every candidate edit is excluded")
        self.gate_mask = np.where(self.rows_allowed, 0.0, MASK_LOGIT)
        self.align_mask = np.where(self.allowed, 0.0, MASK_LOGIT)

    def initial(self):
        cells = self.grid.cells
        return np.zeros(cells), np.zeros((cells, cells))

    def parameters(self, alpha, logits):
        return softmax(alpha + self.gate_mask), softmax(logits + self.align_mask, axis=1)

    def objective_and_gradient(self, alpha, logits):
        """(J, ∂J/∂alpha, ∂J/∂M, a, P)."""
        F, F_prime = self.grid.values, self.distractor.values
        a, P = self.parameters(alpha, logits)
        copied = P @ F_prime
        blended = (1.0 - a)[:, None] * F + a[:, None] * copied
        logprobs, G = head_value_and_gradient(self.model, blended, self.target_class)

        lam_a, lam_p = self.opt.entropy_weight_a, self.opt.entropy_weight_p
        row_entropy = -_xlogx(P).sum(axis=1)
        neg_dentropy_P = _safe_log(P) + 1.0                # -∂H(p_i)/∂P_ij
        if self.opt.gate_p_entropy:
            p_penalty = float(a @ row_entropy)
            row_weight = a
        else:
            row_weight = self.rows_allowed.astype(np.float64)
            p_penalty = float(row_weight @ row_entropy)
        value = float(logprobs[self.target_class]) - lam_a * entropy_penalty(a) - lam_p * p_penalty

        d_a = np.einsum("ik,ik->i", G, copied - F)
        d_a += lam_a * (_safe_log(a) + 1.0)
        if self.opt.gate_p_entropy:
            d_a -= lam_p * row_entropy
        d_P = a[:, None] * (G @ F_prime.T) + lam_p * row_weight[:, None] * neg_dentropy_P

        d_alpha = a * (d_a - a @ d_a)
        d_logits = P * (d_P - (P * d_P).sum(axis=1, keepdims=True))
        return value, d_alpha, d_logits, a, P

    def ascend(self):
        """Plain gradient ascent from the uniform start, one RelaxedStep per evaluated state.

        Stops after ``max_steps`` evaluations or once the lead gate cell and
        its alignment row are both sharper than ``sharpness_stop``.
        """
        opt = self.opt
        alpha, logits = self.initial()
        for _ in range(opt.max_steps):
            value, d_alpha, d_logits, a, P = self.objective_and_gradient(alpha, logits)
            yield RelaxedStep(value, a, P)
            lead = int(np.argmax(a))
            if a[lead] >= opt.sharpness_stop and P[lead].max() >= opt.sharpness_stop:
                return
            alpha = alpha + opt.learning_rate * d_alpha
            logits = logits + opt.learning_rate * d_logits

    def round(self, a, P):
        """Discrete (query cell, distractor cell) from a relaxed state."""
        if self.opt.rounding == RoundingRule.LEAD:
            query_cell = int(np.argmax(np.where(self.rows_allowed, a, -1.0)))
            source_cell = int(np.argmax(np.where(self.allowed[query_cell], P[query_cell], -1.0)))
            return query_cell, source_cell

        # every allowed row proposes its alignment argmax; the head scores the proposals
        rows = np.flatnonzero(self.rows_allowed)
        sources = np.argmax(np.where(self.allowed[rows], P[rows], -1.0), axis=1)
        edited = np.repeat(self.grid.values[None], len(rows), axis=0)
        edited[np.arange(len(rows)), rows] = self.distractor.values[sources]
        scores = head_logprobs_batch(self.model, edited)[:, self.target_class]
        best = int(np.argmax(scores))
        return int(rows[best]), int(sources[best])


def best_edit_relaxed(model, grid, distractor, target_class, excluded=CandidateFilter(),
                      opt=RelaxOptConfig()) -> RelaxedEdit:
    """Gradient ascent on the relaxed best-edit objective, rounded to one discrete edit."""
    problem = RelaxedProblem(model, grid, distractor, target_class, excluded, opt)
    trajectory = []
    for step in problem.ascend():
        trajectory.append(step.value)
    query_cell, source_cell = problem.round(step.a, step.P)
    score = float(head_logprobs(model, single_edit(grid, distractor, query_cell, source_cell))[target_class])
    logger.debug("relaxed best query_cell=%d source_cell=%d score=%.6f steps=%d rounding=%s",
                 query_cell, source_cell, score, len(trajectory), opt.rounding)
    return RelaxedEdit(query_cell, source_cell, score, tuple(trajectory))
