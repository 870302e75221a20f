"""Deterministic software-in-the-loop harness for VTOL hover take-off and landing.

The package closes the loop between a quadrotor truth model, a cascaded
flight controller, a fiducial-marker landing estimator with altitude-source
switching, a mission phase machine, scenario fault injection, and runtime
safety monitors tied to a hazard-traceability model.
"""

__version__ = "0.1.0"
