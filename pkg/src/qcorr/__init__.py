"""Classical HMMs versus unitary-sliced matrix product states.

Submodules: ``linalg`` (small dense complex algebra), ``hmm`` (classical
baselines), ``bbqc`` (the unitary MPS model and its optimizer), ``data``,
``evaluation`` (losses and significance tests), ``quantumlab`` (exact
oracles for the nonlocality and contextuality constructions) and ``cli``.
"""

__version__ = "0.1.0"
