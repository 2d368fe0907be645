"""Exact oracles for the nonlocality and contextuality constructions."""

from qcorr.quantumlab.cluster import (
    ClusterDistribution,
    cluster_circuit_state,
    cluster_distribution,
    ghz_support_violations,
    valid_layouts,
)
from qcorr.quantumlab.contextuality import (
    dense_square_check,
    find_magic_square,
    iter_magic_squares,
    magic_square_check,
    stabilizer_bound_exponents,
    support_lower_bound,
)
from qcorr.quantumlab.ghz import ghz_constraint, lhv_bruteforce, s3_walk_closed_form, s3_walk_prob
from qcorr.quantumlab.pauli import PauliString, commutes, pauli_mul
from qcorr.quantumlab.stabilizer import StabTableau, enumerate_stabilizer_states, measure_pauli, project
from qcorr.quantumlab.statevector import StateVector

__all__ = [
    "ClusterDistribution",
    "PauliString",
    "StabTableau",
    "StateVector",
    "cluster_circuit_state",
    "cluster_distribution",
    "commutes",
    "dense_square_check",
    "enumerate_stabilizer_states",
    "ghz_support_violations",
    "find_magic_square",
    "ghz_constraint",
    "iter_magic_squares",
    "lhv_bruteforce",
    "magic_square_check",
    "measure_pauli",
    "pauli_mul",
    "project",
    "s3_walk_closed_form",
    "s3_walk_prob",
    "stabilizer_bound_exponents",
    "support_lower_bound",
    "valid_layouts",
]
