"""Chance-constrained collision avoidance for satellites under debris uncertainty.

Subpackages by role:

- ``dynamics``     -- two-body + drag equations of motion, RK4 discretization,
                      satellite/debris trajectory rollouts.
- ``uncertainty``  -- debris position mean/covariance forecasting (linearized,
                      sigma-point, and Monte Carlo propagators).
- ``risk``         -- ellipsoidal free-set construction, the worst-case CVaR
                      bound over the moment ambiguity set, sampling oracles.
- ``cem``          -- constrained cross-entropy control-sequence optimizer.
- ``mpc``          -- receding-horizon controller, closed-loop episodes, and
                      batch experiments.
- ``config``       -- scenario schema, YAML loading, defaults.
- ``cli``          -- command-line front end (run / sweep / validate).
"""

__version__ = "0.1.0"
