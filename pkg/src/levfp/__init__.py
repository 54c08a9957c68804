"""Leverage-score feature selection for connectome fingerprinting.

Core subpackages: `sketch` (row sampling and leverage scores), `connectome`
(preprocessing and edge indexing), `fingerprint` (identification protocols),
`stats` (enrichment and empirical p-values), `synth` (planted-signature
cohorts), plus a CLI (`levfp`) and a FastAPI service (`levfp.service`).
"""

__version__ = "0.1.0"
