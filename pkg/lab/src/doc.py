DESCRIPTION = """
# Overview
A pseudospectral laboratory for the cubic defocusing Schrodinger equation
 i u_t + Lap u = |u|^2 u on a periodic square. Alongside the split-step solver it
 computes the I-method modified energy E(Iu), the commutator
 I(|u|^2 u) - |Iu|^2 Iu, and interaction Morawetz actions and estimates.

# Usage

Every subcommand prints one JSON object on stdout; logs go to stderr.

* run: one trajectory with trajectory.csv, summary.json, trajectory.gp,
 config.env and snapshot_final.bin.
* sweep-n: E(Iu) increments and commutator norms over IMETHOD__N_LIST, written to
 sweep.csv and summary.json with the fitted log-log slopes.
* morawetz: morawetz.json with the u-level and Iu-level inequalities, the action
 identity residual and the positivity of the derivative terms, plus
 morawetz_terms.csv.
* regions: region_1.json to region_4.json.
* plan: the scaling plan for PLANNER__S, T0 and m0.
* oracle-validate: the brute-force battery at n = 8, 12, 16, written to oracle.jsonl
 when --out is given.

Exit status is 0 on success, 2 for configuration errors, 3 for numeric failures and
 4 when an oracle comparison fails.
"""

CONFIG_GRAMMAR = """
# Experiment files
One KEY=value per line, KEY being SECTION__FIELD (case insensitive). Blank lines and
 lines starting with # are ignored. Lists are comma separated and inf is accepted.

  GRID__N=256                 power of two, >= 8
  GRID__L=32.0
  DATA__KIND=                 gaussian | random_hs (unset: random_hs for sweep-n,
                              gaussian otherwise)
  DATA__A=1.0
  DATA__SIGMA=1.0             <= L/8
  DATA__X0=0.0,0.0
  DATA__V=0.0,0.0
  DATA__S=0.3                 random_hs regularity
  DATA__SEED=0
  DATA__NORMALIZE_HS=1.0      optional H^s norm for random_hs data
  SOLVER__DT=0.001
  SOLVER__T=1.0
  SOLVER__RECORD_STRIDE=10
  SOLVER__DEALIAS=true
  SOLVER__NONLINEAR=true
  SOLVER__MAX_MASS_DRIFT=1e-6
  IMETHOD__S=0.5
  IMETHOD__N=8                cutoff in units of 2 pi / L
  IMETHOD__N_LIST=4,8,16,32
  IMETHOD__REGION_SAMPLES=100000
  IMETHOD__REGION_SEED=0
  MORAWETZ__M_POLICY=T_cubed_root   T_cubed_root | fixed
  MORAWETZ__M=2.0             required when fixed, <= L/4
  MORAWETZ__EPSILON=0.5
  MORAWETZ__SUITE_CONSTANT=
  PLANNER__S=0.5
  PLANNER__T0=1.0
  PLANNER__M0=1.0
  PLANNER__C_PRIME=1.0
  PLANNER__C0=1.0
  PLANNER__EPSILON=0.1
  PLANNER__DELTA_EXP=0.01
  OUTPUT__DIRECTORY=out
  OUTPUT__FORMATS=csv,json,gnuplot,snapshot,config
"""
