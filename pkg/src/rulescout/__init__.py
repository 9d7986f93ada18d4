"""Interactive discovery of labeling rules over text corpora.

Given a seed rule (or a couple of labeled sentences), the engine proposes
candidate rules mined from a trie index of bounded grammar derivations,
asks an oracle (simulated from gold labels, or a human behind the HTTP
service) to verify them, and accumulates a high-recall set of rules, the
positive sentences they cover, and a trained scorer.
"""

__version__ = "0.1.0"
