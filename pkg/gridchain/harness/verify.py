"""
Ledger verification: frame, decode and replay a ledger file against its
genesis, reporting the first failing height
"""

import logging
from pathlib import Path

from pydantic import BaseModel, ConfigDict

from gridchain.errors import ReplayError
from gridchain.ledger.genesis import Genesis
from gridchain.ledger.replay import replay_blocks
from gridchain.ledger.storage import read_ledger

logger = logging.getLogger(__name__)


class IntegrityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    ok: bool
    blocks_verified: int
    tip_height: int | None = None
    state_root: str | None = None
    failure_height: int | None = None
    reason: str | None = None


def verify_ledger(ledger_path: str | Path, genesis_path: str | Path) -> IntegrityReport:
    """Replay every block; raises only for unreadable files"""
    genesis = Genesis.load(Path(genesis_path))
    contents = read_ledger(Path(ledger_path))

    verified = 0
    tip_height, root = None, None
    try:
        for step in replay_blocks(contents.blocks, genesis):
            verified += 1
            tip_height, root = step.block.height, step.world.root.hex()
    except ReplayError as e:
        logger.warning(f"Verification failed at height {e.height}: {e.reason}")
        return IntegrityReport(
            ok=False,
            blocks_verified=verified,
            tip_height=tip_height,
            state_root=root,
            failure_height=e.height,
            reason=e.reason,
        )

    if contents.error is not None:
        logger.warning(f"Ledger framing error: {contents.error}")
        return IntegrityReport(
            ok=False,
            blocks_verified=verified,
            tip_height=tip_height,
            state_root=root,
            failure_height=contents.error.height,
            reason=f"framing: {contents.error}",
        )
    logger.info(f"Verified {verified} blocks, tip {tip_height}")
    return IntegrityReport(ok=True, blocks_verified=verified, tip_height=tip_height, state_root=root)
