"""Teleoperation robot cell simulator.

Modules: frames (coordinate conventions), wire (UDP position stream),
kinematics (FK/IK/Jacobian), controller (simulated robot controller),
pointcloud (depth pipeline), monitor (HTTP/push service), session
(demonstration recording), analysis (evaluation kit), cli (cell command).
"""

__version__ = "0.1.0"
