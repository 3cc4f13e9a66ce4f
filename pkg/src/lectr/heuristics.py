"""Hand-crafted advising baselines.

Expert-teacher heuristics answer with the teacher's greedy action at the
student's observation and draw from a shared advice budget.  The AdHoc
variants use the live teammate as teacher and advise probabilistically in
states the student has rarely visited.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np


class HeuristicKind(str, enum.Enum):
    NONE = "NONE"
    ASK_IMPORTANT = "ASK_IMPORTANT"
    ASK_UNCERTAIN = "ASK_UNCERTAIN"
    EARLY_ADVISING = "EARLY_ADVISING"
    IMPORTANCE_ADVISING = "IMPORTANCE_ADVISING"
    EARLY_CORRECTING = "EARLY_CORRECTING"
    CORRECT_IMPORTANT = "CORRECT_IMPORTANT"
    ADHOC_VISIT = "ADHOC_VISIT"
    ADHOC_TD = "ADHOC_TD"

    @property
    def student_initiated(self) -> bool:
        return self in (HeuristicKind.ASK_IMPORTANT, HeuristicKind.ASK_UNCERTAIN,
                        HeuristicKind.ADHOC_VISIT, HeuristicKind.ADHOC_TD)

    @property
    def teacher_initiated(self) -> bool:
        return self in (HeuristicKind.EARLY_ADVISING, HeuristicKind.IMPORTANCE_ADVISING,
                        HeuristicKind.EARLY_CORRECTING, HeuristicKind.CORRECT_IMPORTANT)

    @property
    def needs_expert(self) -> bool:
        return (self.student_initiated and not self.adhoc) or self.teacher_initiated

    @property
    def adhoc(self) -> bool:
        return self in (HeuristicKind.ADHOC_VISIT, HeuristicKind.ADHOC_TD)

    @property
    def budgeted(self) -> bool:
        return self.needs_expert


@dataclass
class HeuristicState:
    threshold: float = 0.01
    budget: int = 100
    upsilon: float = 0.5
    # visits[agent][obs]
    visits: list = field(default_factory=lambda: [defaultdict(int), defaultdict(int)])
    # last |TD error| seen by each agent at each observation
    last_td: list = field(default_factory=lambda: [defaultdict(float), defaultdict(float)])
    advice_given: int = 0

    def record_visit(self, agent: int, obs) -> None:
        self.visits[agent][obs] += 1

    def record_td(self, agent: int, obs, delta: float) -> None:
        self.last_td[agent][obs] = abs(delta)


def state_importance(q_vector, a_hat: int) -> float:
    q = np.asarray(q_vector)
    if not 0 <= a_hat < len(q):
        raise ValueError(f"action {a_hat} out of range")
    return float(q.max() - q[a_hat])


def decide_request(kind: HeuristicKind, state: HeuristicState, student_q,
                   intended_action: int) -> bool:
    kind = HeuristicKind(kind)
    if kind is HeuristicKind.ASK_IMPORTANT:
        return state_importance(student_q, intended_action) >= state.threshold
    if kind is HeuristicKind.ASK_UNCERTAIN:
        return state_importance(student_q, intended_action) < state.threshold
    # AdHoc students are always willing; the teacher side gates the exchange
    return kind.adhoc


def adhoc_probability(kind: HeuristicKind, state: HeuristicState, student: int, obs) -> float:
    """Probability that an AdHoc teacher answers in the student's state.

    Visit variant: (1 + upsilon) ** -n(s), with n(s) the student's visit
    count, so fresh states are always advised.  TD variant: the visit count
    is discounted by the student's last |TD error| there, so surprising
    states keep receiving advice longer.
    """
    n = state.visits[student][obs]
    if kind is HeuristicKind.ADHOC_TD:
        n = n / (1.0 + state.last_td[student][obs])
    return float((1.0 + state.upsilon) ** (-n))


def decide_advise(kind: HeuristicKind, state: HeuristicState, teacher_q, student_obs,
                  intended_action: int, rng: np.random.Generator, student: int = 0):
    """Return the advised action index (teacher's frame) or None."""
    kind = HeuristicKind(kind)
    if kind is HeuristicKind.NONE:
        return None
    teacher_q = np.asarray(teacher_q)
    best = int(np.argmax(teacher_q))
    if kind.adhoc:
        p = adhoc_probability(kind, state, student, student_obs)
        return best if rng.random() < p else None
    if kind.budgeted and state.advice_given >= state.budget:
        return None
    important = state_importance(teacher_q, intended_action) >= state.threshold
    differs = best != intended_action
    if kind is HeuristicKind.IMPORTANCE_ADVISING:
        go = important
    elif kind is HeuristicKind.EARLY_CORRECTING:
        go = differs
    elif kind is HeuristicKind.CORRECT_IMPORTANT:
        go = important and differs
    else:
        # early advising, and expert answers to student requests
        go = True
    if not go:
        return None
    state.advice_given += 1
    return best
