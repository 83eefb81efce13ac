"""Action selection: the decision tree mapping intention, cluster role,
resolution outcome and flags to the final action.

The output is always one of the intended action, the best straight action or
the backup plan action. Losing receivers must brake; losing pure senders
take their best straight action; a lane change is only ever taken by a
winner with a clear max-yielding flag and a true dynamic-safety evaluation.
Any mandated action that fails dynamic safety degrades to the backup plan.
"""

from typing import NamedTuple

from .dynamics import LANE_CHANGES, backup_plan_action
from .oracles import dynamic_safety

ROLE_NEITHER = "neither"
ROLE_SENDER = "sender"
ROLE_RECEIVER = "receiver"
ROLE_BOTH = "both"

BRANCH_RECEIVER_LOST = "receiver_lost_bp"
BRANCH_SENDER_LOST_ST = "sender_lost_st"
BRANCH_SENDER_LOST_BP = "sender_lost_bp"
BRANCH_LANE_CHANGE = "lane_change_taken"
BRANCH_INTENT = "intent_taken"
BRANCH_FALLBACK_ST = "fallback_st"
BRANCH_FALLBACK_BP = "fallback_bp"


class SelectionInput(NamedTuple):
    intent: object  # Action
    straight: object  # Action
    role: str
    winner: bool
    flag: bool


def select_action(view, me, sel):
    """Returns (action, branch id)."""
    pose = view.poses[me]
    a_bp = backup_plan_action(pose, view.params)

    if sel.role in (ROLE_RECEIVER, ROLE_BOTH) and not sel.winner:
        return a_bp, BRANCH_RECEIVER_LOST
    if sel.role == ROLE_SENDER and not sel.winner:
        if dynamic_safety(view, me, sel.straight):
            return sel.straight, BRANCH_SENDER_LOST_ST
        return a_bp, BRANCH_SENDER_LOST_BP

    if sel.intent.steer in LANE_CHANGES:
        if sel.winner and not sel.flag and dynamic_safety(view, me, sel.intent):
            return sel.intent, BRANCH_LANE_CHANGE
    else:
        if dynamic_safety(view, me, sel.intent):
            return sel.intent, BRANCH_INTENT

    if dynamic_safety(view, me, sel.straight):
        return sel.straight, BRANCH_FALLBACK_ST
    return a_bp, BRANCH_FALLBACK_BP
