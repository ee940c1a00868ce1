"""
Scenario Runner
Builds genesis and the validator network, then drives prosumers, scripted
actors and the oracle tick by tick in a fixed order
"""

import logging
from dataclasses import dataclass
from pathlib import Path

from gridchain.agents.aggregator_agent import AggregatorAgent, ContractedProsumer, ServiceRequest
from gridchain.agents.dso_agent import DSOAgent
from gridchain.agents.market_operator_agent import MarketOperatorAgent
from gridchain.agents.prosumer_agent import ProsumerAgent
from gridchain.harness.config import ScenarioConfig
from gridchain.harness.reports import NetworkSummary, ReportBundle, build_report, write_report
from gridchain.ledger.crypto import KeyPair, create_account, seed_from_label
from gridchain.ledger.genesis import Genesis, account_entry
from gridchain.ledger.network import MessageBus
from gridchain.ledger.primitives import Block, Transaction
from gridchain.ledger.simulation import NetworkSimulation
from gridchain.ledger.storage import write_ledger
from gridchain.oracle.service import OracleService

logger = logging.getLogger(__name__)

LEDGER_FILE = "ledger.bin"
GENESIS_FILE = "genesis.json"


@dataclass(frozen=True)
class ActorKeys:
    validators: list[KeyPair]
    oracle: KeyPair
    aggregator: KeyPair
    operator: KeyPair


@dataclass(frozen=True)
class RunResult:
    genesis: Genesis
    blocks: list[Block]
    report: ReportBundle
    converged: bool


def _key(label: str, seed: int) -> KeyPair:
    return create_account(seed_from_label(label, seed))[0]


def actor_keys(config: ScenarioConfig) -> ActorKeys:
    return ActorKeys(
        validators=[_key(f"validator:{i}", config.seed) for i in range(config.validators)],
        oracle=_key("oracle", config.seed),
        aggregator=_key("aggregator", config.seed),
        operator=_key("market-operator", config.seed),
    )


def build_genesis(config: ScenarioConfig, keys: ActorKeys, prosumers: list[ProsumerAgent]) -> Genesis:
    accounts = [account_entry(k, "validator", f"validator-{i}") for i, k in enumerate(keys.validators)]
    accounts += [
        account_entry(keys.oracle, "oracle", "oracle"),
        account_entry(keys.aggregator, "aggregator", "aggregator"),
        account_entry(keys.operator, "operator", "market-operator"),
    ]
    accounts += [account_entry(p.config.key(), "prosumer", p.config.id) for p in prosumers]
    return Genesis(
        chain_id=config.chain_id,
        slots_per_day=config.slots_per_day,
        validators=tuple(k.address for k in keys.validators),
        oracle=keys.oracle.address,
        accounts=tuple(accounts),
    )


def simulate(config: ScenarioConfig) -> RunResult:
    """Run a scenario in memory; deterministic for a given config and seed"""
    keys = actor_keys(config)
    prosumers = [ProsumerAgent(p) for p in config.resolved_prosumers()]
    genesis = build_genesis(config, keys, prosumers)

    bus = MessageBus(
        delay_ticks=config.network.delay_ticks,
        jitter_ticks=config.network.jitter_ticks,
        drop_probability=config.network.drop_probability,
        seed=config.seed,
    )
    network = NetworkSimulation(
        genesis, keys.validators, bus, heartbeat_ticks=config.network.heartbeat_ticks
    )
    oracle = OracleService(keys.oracle)
    dso = DSOAgent(config.congestion_events if config.runs_dr else ())
    operator = MarketOperatorAgent(keys.operator, config.slots) if config.runs_p2p else None
    aggregator = AggregatorAgent(
        keys.aggregator,
        [
            ContractedProsumer(
                address=p.address,
                congestion_point=p.config.congestion_point,
                flex_capacity_wh=p.config.flex_capacity_wh,
                flex_cost_rate=p.config.flex_cost_rate,
            )
            for p in prosumers
        ],
        baseline_tick=config.baseline_tick,
        run_dr=config.runs_dr,
        run_vpp=config.runs_vpp,
        services=[
            ServiceRequest(tick=s.tick, window_start=s.window_start, service=s.service)
            for s in (config.vpp_services if config.runs_vpp else ())
        ],
    )

    total_ticks = config.slots + config.drain_ticks
    logger.info(f"Running {config.scenario} scenario for {total_ticks} ticks")
    for tick in range(total_ticks):
        view = network.view(0)
        transactions: list[Transaction] = []
        for prosumer in prosumers:
            transactions += prosumer.step(view, tick)
        transactions += aggregator.step(view, tick, dso.step(tick))
        if operator is not None:
            transactions += operator.step(view, tick)
        transactions += oracle.step(view, tick)
        network.submit(transactions, tick)
        network.run_tick(tick)
        if tick and tick % (config.slots_per_day * 7) == 0:
            logger.info(f"Tick {tick}: height {network.view(0).height}")

    # Blocks from the last ticks may still be on the bus; drain it before comparing tips
    network.settle(config.network.lead_ticks)
    converged = network.converged()
    if not converged:
        logger.warning("Validators did not converge on one tip by the end of the run")
    blocks = network.canonical_chain()
    summary = NetworkSummary(
        converged=converged,
        divergences=len(network.log.divergences),
        max_lag_ticks=network.log.max_lag(len(network.nodes)),
        messages_sent=bus.sent,
        messages_dropped=bus.dropped,
    )
    report = build_report(blocks, genesis, scenario=config.scenario, seed=config.seed, network=summary)
    return RunResult(genesis=genesis, blocks=blocks, report=report, converged=converged)


def run(config: ScenarioConfig, out_dir: str | Path) -> RunResult:
    """Run a scenario and write the ledger, genesis and reports to ``out_dir``"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = simulate(config)
    write_ledger(out / LEDGER_FILE, result.blocks)
    result.genesis.save(out / GENESIS_FILE)
    write_report(result.report, out)
    logger.info(f"Run written to {out}: {len(result.blocks)} blocks")
    return result
