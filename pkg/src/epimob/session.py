"""Line-delimited JSON session protocol over stdio.

One request per line on stdin, one response per line on stdout; the
protocol carries stepwise control of a simulation run so external
scripting layers can drive the engine without linking against it.

Requests:

    {"op": "open", "scenario": "<path>", "seed": 1, "mode": "stochastic"}
    {"op": "step_day"}
    {"op": "step_day", "plan": {"<person id>": "isolate", ...}}
    {"op": "query", "selector": "summary"}
    {"op": "query", "selector": "people"}
    {"op": "query", "selector": "traced", "order": 1}
    {"op": "close"}

Responses are {"ok": true, "result": ...} or {"ok": false, "error": "..."}.
A step_day plan replaces the built-in strategy at that day boundary; its
entries take effect the following day.  Failed requests leave the session
state unchanged.  After close (or on EOF) the process exits.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict

from .engine import SimulationRun
from .scenario import ScenarioError, load_scenario
from .tracing import fast_contact_tracing

__all__ = ["SessionServer", "serve"]

_STATE_NAMES = ("susceptible", "pre_symptomatic", "symptomatic", "recovered")


class SessionServer:
    """Holds at most one open simulation and executes protocol requests."""

    def __init__(self):
        self.sim: SimulationRun | None = None
        self.closed = False

    # -- request handlers --------------------------------------------------

    def _require_open(self) -> SimulationRun:
        if self.closed:
            raise ScenarioError("session is closed")
        if self.sim is None:
            raise ScenarioError("no open simulation; send an open request first")
        return self.sim

    def _handle_open(self, request: dict) -> dict:
        if self.closed:
            raise ScenarioError("session is closed")
        if self.sim is not None:
            raise ScenarioError("a simulation is already open in this session")
        if "scenario" not in request:
            raise ScenarioError("open requires a scenario path")
        scenario = load_scenario(request["scenario"])
        self.sim = SimulationRun(scenario, int(request.get("seed", 0)),
                                 mode=str(request.get("mode", "stochastic")))
        return {"day": 0, "people": scenario.city.num_people,
                "days": scenario.params.days, "summary": self._summary()}

    def _summary(self) -> dict:
        sim = self._require_open()
        counts = sim.ledger.counts()
        summary = {name: value for name, value in zip(_STATE_NAMES, counts)}
        summary["cumulative_infected"] = sim.ledger.cumulative_infected
        summary["day"] = sim.day
        summary["people"] = sim.city.num_people
        return summary

    def _handle_step_day(self, request: dict) -> dict:
        sim = self._require_open()
        plan = request.get("plan")
        if plan is not None and not isinstance(plan, dict):
            raise ScenarioError("plan must map person ids to restriction levels")
        record = sim.run_day(user_plan=plan)
        return asdict(record)

    def _handle_query(self, request: dict) -> dict:
        sim = self._require_open()
        selector = request.get("selector", "summary")
        if selector == "summary":
            return self._summary()
        if selector == "people":
            return {"states": [_STATE_NAMES[s] for s in sim.ledger.state]}
        if selector == "traced":
            order = int(request.get("order", 1))
            if order < 1:
                raise ScenarioError("traced order must be >= 1")
            if sim.last_step < 0 or sim.last_confirmed.size == 0:
                return {"orders": [[] for _ in range(order)]}
            trace = fast_contact_tracing(sim.last_confirmed, sim.store, sim.last_step,
                                         sim.strategy.tau, order,
                                         reduction=sim.strategy.reduction)
            return {"orders": [ids.tolist() for ids in trace.per_order]}
        raise ScenarioError(f"unknown selector {selector!r}")

    def _handle_close(self, request: dict) -> dict:
        if self.closed:
            raise ScenarioError("session is closed")
        self.sim = None
        self.closed = True
        return {"closed": True}

    # -- dispatch ------------------------------------------------------------

    def handle(self, request: dict) -> dict:
        handlers = {
            "open": self._handle_open,
            "step_day": self._handle_step_day,
            "query": self._handle_query,
            "close": self._handle_close,
        }
        op = request.get("op")
        if op not in handlers:
            return {"ok": False, "error": f"unknown op {op!r}"}
        try:
            return {"ok": True, "result": handlers[op](request)}
        except (ScenarioError, ValueError, LookupError) as exc:
            return {"ok": False, "error": str(exc)}


def serve(stdin=None, stdout=None) -> int:
    """Run the request loop until close or EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    server = SessionServer()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = {"ok": False, "error": f"malformed request: {exc}"}
        else:
            response = server.handle(request)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
        if server.closed:
            break
    return 0
