"""Grant-free uplink user-detection analysis and simulation."""
