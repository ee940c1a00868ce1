"""
Market Operator Agent
Deploys the P2P market and asks the oracle to clear each slot once it has passed
"""

import logging

from gridchain.contracts.payloads import MarketInit, OracleRequestBody
from gridchain.ledger.crypto import NULL_ADDRESS, Address, KeyPair, contract_address
from gridchain.ledger.node import ChainView
from gridchain.ledger.primitives import Transaction, TxKind, make_transaction
from gridchain.oracle.models import ClearParams

logger = logging.getLogger(__name__)


class MarketOperatorAgent:
    def __init__(self, key: KeyPair, slots: int) -> None:
        self.key = key
        self.slots = slots
        self.nonce = 0
        self.market: Address | None = None

    def step(self, view: ChainView, tick: int) -> list[Transaction]:
        out = []
        if tick == 0:
            self.market = contract_address(self.key.address, self.nonce)
            out.append(
                make_transaction(self.key, NULL_ADDRESS, self.nonce, TxKind.DEPLOY, MarketInit())
            )
            self.nonce += 1
            logger.info(f"Market operator deploying market at {self.market.short()}")
        elif self.market is not None and 1 <= tick <= self.slots:
            # Orders for slot tick-1 were submitted last tick
            body = OracleRequestBody(
                service="clear",
                target=self.market,
                params=ClearParams(slot=tick - 1).model_dump(mode="json"),
            )
            out.append(
                make_transaction(
                    self.key, view.genesis.oracle, self.nonce, TxKind.ORACLE_REQUEST, body
                )
            )
            self.nonce += 1
        return out
