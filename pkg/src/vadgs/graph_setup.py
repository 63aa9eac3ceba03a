import logging
from typing import Any, Callable, Dict

from langgraph.graph import END, StateGraph

from .errors import DataError
from .state import InstanceState
from .voxels import InstanceStatus

logger = logging.getLogger(__name__)


def _guarded(name: str, stage: Callable[[Dict[str, Any]], Dict[str, Any]]):
    def node(state: Dict[str, Any]) -> Dict[str, Any]:
        try:
            updates = stage(state)
        except DataError as exc:
            logger.warning("Instance %s failed in %s: %s", state.get("instance_id"), name, exc)
            return {"error": f"{type(exc).__name__}: {exc}", "stage": name, "messages": [f"{name}: failed"]}
        updates.setdefault("messages", [f"{name}: done"])
        return updates
    return node


def build_instance_graph(stages):
    """Build the detect-and-densify workflow run once per instance.

    ``stages`` provides prepare, flag, select, reconstruct, spawn, adjust and
    evaluate, each mapping the state to its updates.
    """

    def after_prepare(state: Dict[str, Any]) -> str:
        return "END" if state.get("error") else "flag"

    def after_flag(state: Dict[str, Any]) -> str:
        if state.get("error") or state.get("pre_status") != InstanceStatus.INCOMPLETE:
            return "END"
        return "select"

    def after_matching_stage(next_stage: str):
        def route(state: Dict[str, Any]) -> str:
            if state.get("error"):
                return "adjust" if state.get("spawned") else "END"
            return next_stage
        return route

    def after_spawn(state: Dict[str, Any]) -> str:
        if state.get("error"):
            return "adjust" if state.get("spawned") else "END"
        if state.get("cursor", 0) < len(state.get("references", [])):
            return "select"
        return "adjust"

    def after_adjust(state: Dict[str, Any]) -> str:
        return "END" if state.get("opacities") is None else "evaluate"

    workflow = StateGraph(InstanceState)

    for name in ("prepare", "flag", "select", "reconstruct", "spawn", "adjust", "evaluate"):
        workflow.add_node(name, _guarded(name, getattr(stages, name)))

    workflow.set_entry_point("prepare")

    workflow.add_conditional_edges("prepare", after_prepare, {"flag": "flag", "END": END})
    workflow.add_conditional_edges("flag", after_flag, {"select": "select", "END": END})
    workflow.add_conditional_edges(
        "select", after_matching_stage("reconstruct"),
        {"reconstruct": "reconstruct", "adjust": "adjust", "END": END},
    )
    workflow.add_conditional_edges(
        "reconstruct", after_matching_stage("spawn"),
        {"spawn": "spawn", "adjust": "adjust", "END": END},
    )
    workflow.add_conditional_edges(
        "spawn", after_spawn,
        {"select": "select", "adjust": "adjust", "END": END},
    )
    workflow.add_conditional_edges("adjust", after_adjust, {"evaluate": "evaluate", "END": END})
    workflow.add_edge("evaluate", END)

    return workflow.compile()
