"""
gridchain
Proof-of-Authority ledger, smart contracts, oracle services and prosumer
simulation for blockchain-based smart-grid management.
"""

__version__ = "0.1.0"
