# This file defines the flow of one splitting run.
# The nodes share a SplittingState and loop convect -> apply_event until the
# last event at t = horizon has fired.

from functools import lru_cache

from langgraph.graph import END, StateGraph

from relaxlab.nodes.bookkeeping import initialize
from relaxlab.nodes.sources import fire_event
from relaxlab.nodes.transport import convect_interval
from relaxlab.state import SplittingState


def route_after_event(state: SplittingState) -> str:
    return "convect" if state.step < state.scheme.n_events else END


def build_graph():
    graph = StateGraph(SplittingState)

    graph.add_node("initialize", initialize)  # checks t=0, writes the initial row
    graph.add_node("convect", convect_interval)  # transport over one dt
    graph.add_node("apply_event", fire_event)  # Dirac event at t = n dt

    graph.set_entry_point("initialize")
    graph.add_edge("initialize", "convect")
    graph.add_edge("convect", "apply_event")
    graph.add_conditional_edges("apply_event", route_after_event, {"convect": "convect", END: END})

    return graph.compile()


@lru_cache(maxsize=1)
def pipeline():
    return build_graph()


def recursion_limit(n_events: int) -> int:
    # two super-steps per event plus the entry node
    return 2 * n_events + 10
