"""Numeric tolerances used across the package.

Euclidean arc costs are irrational, so every comparison against a cost,
objective or LP value goes through one of the constants below instead of
exact equality.  Keeping them in one place makes the solver's numeric
behaviour auditable.
"""

# Comparing costs / prizes / follower values (tie detection in the oracles).
COST_TOL = 1e-9

# A variable value v is treated as integral when |v - round(v)| <= INT_TOL.
INT_TOL = 1e-6

# A cut is emitted only when violated by more than CUT_TOL.
CUT_TOL = 1e-6

# Incumbent acceptance / bound pruning inside branch and bound.
PRUNE_TOL = 1e-7

# Re-solving an unchanged LP must reproduce the objective within this.
LP_REPRO_TOL = 1e-7

# Bilevel feasibility audits (follower value and leader contribution).
AUDIT_TOL = 1e-6
