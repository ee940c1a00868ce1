"""
Tests for trace loading and the scripted agents
"""

from fractions import Fraction
from pathlib import Path

import pytest
from pydantic import ValidationError

from gridchain.agents.dso_agent import CongestionSignal, DSOAgent
from gridchain.agents.market_operator_agent import MarketOperatorAgent
from gridchain.agents.prosumer_agent import (
    Obligation,
    ProsumerConfig,
    ProsumerState,
    adjustment,
    prosumer_step,
    read_obligations,
)
from gridchain.agents.traces import load_traces, synthesize_traces, write_traces
from gridchain.contracts.models import Direction, EnergyReading, Side
from gridchain.contracts.payloads import DRInit, IssueOrderBody, MarketInit, SubmitOrderBody
from gridchain.errors import TraceFormatError
from gridchain.ledger.crypto import NULL_ADDRESS, contract_address, seed_from_label
from gridchain.ledger.primitives import TxKind, verify_transaction

pytestmark = pytest.mark.unit

DATA_DIR = Path(__file__).resolve().parent.parent / "gridchain" / "data"
HEADER = "prosumer_id,slot,consumption_wh,generation_wh\n"


def _write(tmp_path, rows, header=HEADER):
    path = tmp_path / "traces.csv"
    path.write_text(header + "".join(f"{r}\n" for r in rows), encoding="utf-8")
    return path


def _alice(consumption, generation, **extra):
    return ProsumerConfig(
        id="alice",
        account_seed=seed_from_label("prosumer:alice", 0).hex(),
        consumption_trace=tuple(consumption),
        generation_trace=tuple(generation),
        **extra,
    )


# ============================================================================
# TRACES
# ============================================================================


class TestTraces:
    def test_well_formed_file(self, tmp_path):
        rows = [f"p{p},{s},{100 + s},{s % 3}" for p in range(3) for s in range(48)]
        traces = load_traces(_write(tmp_path, rows))
        assert sorted(traces) == ["p0", "p1", "p2"]
        assert all(len(series) == 48 for series in traces.values())
        assert traces["p1"].net(5) == 105 - 2

    def test_rows_may_come_in_any_order(self, tmp_path):
        traces = load_traces(_write(tmp_path, ["a,1,20,0", "a,0,10,0"]))
        assert traces["a"].consumption_wh == (10, 20)

    def test_missing_slot_is_named(self, tmp_path):
        rows = [f"p0,{s},100,0" for s in range(48) if s != 17]
        with pytest.raises(TraceFormatError, match="missing slot 17"):
            load_traces(_write(tmp_path, rows))

    def test_negative_consumption(self, tmp_path):
        with pytest.raises(TraceFormatError, match="non-negative"):
            load_traces(_write(tmp_path, ["p0,0,-5,0"]))

    def test_duplicate_row(self, tmp_path):
        with pytest.raises(TraceFormatError, match="duplicate"):
            load_traces(_write(tmp_path, ["p0,0,5,0", "p0,0,6,0"]))

    @pytest.mark.parametrize("value", ["1.5", "abc", ""])
    def test_non_integer_value(self, tmp_path, value):
        with pytest.raises(TraceFormatError, match="not an integer"):
            load_traces(_write(tmp_path, [f"p0,0,{value},0"]))

    def test_wrong_header(self, tmp_path):
        with pytest.raises(TraceFormatError, match="header"):
            load_traces(_write(tmp_path, ["p0,0,5,0"], header="id,slot,load,pv\n"))

    def test_bundled_fixtures_load(self):
        traces = load_traces(DATA_DIR / "traces_10x7.csv")
        assert len(traces) == 10
        assert {len(series) for series in traces.values()} == {168}

    def test_synthesized_traces_survive_a_file(self, tmp_path):
        traces = synthesize_traces(["p01", "p02"], slots=48, seed=3)
        assert traces == synthesize_traces(["p01", "p02"], slots=48, seed=3)
        path = tmp_path / "out.csv"
        write_traces(path, traces)
        assert load_traces(path) == traces
        assert b"\r\n" not in path.read_bytes()


# ============================================================================
# PROSUMER
# ============================================================================


class TestProsumerConfig:
    @pytest.mark.parametrize("given, expected", [("1/2", Fraction(1, 2)), ("0.8", Fraction(4, 5)), (1, Fraction(1))])
    def test_compliance_is_rational(self, given, expected):
        assert _alice([1], [0], dr_compliance=given).dr_compliance == expected

    @pytest.mark.parametrize("given", ["3/2", -1, True, "half"])
    def test_compliance_outside_the_unit_interval(self, given):
        with pytest.raises(ValidationError):
            _alice([1], [0], dr_compliance=given)

    def test_traces_must_match(self):
        with pytest.raises(ValidationError):
            _alice([1, 2], [0])

    def test_key_comes_from_the_seed(self, keys):
        assert _alice([1], [0]).key() == keys.alice


class TestAdjustment:
    REDUCE = Obligation("dr", NULL_ADDRESS, "0", 10, 12, Direction.REDUCE, 1000)

    def test_full_compliance(self):
        assert 5000 + adjustment((self.REDUCE,), 10, Fraction(1), 1000) == 4000

    def test_half_compliance(self):
        assert 5000 + adjustment((self.REDUCE,), 10, Fraction(1, 2), 1000) == 4500

    def test_inactive_slot(self):
        assert adjustment((self.REDUCE,), 12, Fraction(1), 1000) == 0

    def test_capped_by_capacity(self):
        assert adjustment((self.REDUCE,), 11, Fraction(1), 300) == -300

    def test_increase_orders_raise_consumption(self):
        up = Obligation("dr", NULL_ADDRESS, "1", 10, 11, Direction.INCREASE, 700)
        assert adjustment((self.REDUCE, up), 10, Fraction(1, 3), 1000) == -333 + 233

    def test_zero_compliance(self):
        assert adjustment((self.REDUCE,), 10, Fraction(0), 1000) == 0


class TestProsumerStep:
    @pytest.fixture
    def market_view(self, builder):
        deploy, market = builder.deploy(builder.keys.operator, MarketInit())
        builder.add_block([deploy])
        return builder, market

    @staticmethod
    def _orders(transactions):
        return [
            SubmitOrderBody.model_validate_json(tx.payload)
            for tx in transactions
            if tx.kind is TxKind.MARKET_SUBMIT_ORDER
        ]

    def test_first_step_deploys_the_meter(self, market_view):
        builder, _ = market_view
        state, txs = prosumer_step(_alice([3000], [5000]), ProsumerState(), 0, builder.view())
        assert txs[0].kind is TxKind.DEPLOY and txs[0].receiver == NULL_ADDRESS
        assert state.meter == contract_address(builder.keys.alice.address, 0)
        assert [tx.nonce for tx in txs] == list(range(len(txs)))
        assert state.next_nonce == len(txs)

    def test_surplus_becomes_an_offer(self, market_view):
        builder, market = market_view
        _, txs = prosumer_step(_alice([3000], [5000], ask_price=180), ProsumerState(), 0, builder.view())
        reading = EnergyReading.model_validate_json(txs[1].payload)
        assert reading.energy_wh == -2000
        (order,) = self._orders(txs)
        assert (order.side, order.qty_wh, order.limit_price, order.slot) == (Side.OFFER, 2000, 180, 0)
        assert txs[-1].receiver == market

    def test_deficit_becomes_a_bid(self, market_view):
        builder, _ = market_view
        _, txs = prosumer_step(_alice([5000], [3000], bid_price=320), ProsumerState(), 0, builder.view())
        (order,) = self._orders(txs)
        assert (order.side, order.qty_wh, order.limit_price) == (Side.BID, 2000, 320)

    def test_balanced_slot_places_no_order(self, market_view):
        builder, _ = market_view
        _, txs = prosumer_step(_alice([400], [400]), ProsumerState(), 0, builder.view())
        assert self._orders(txs) == []

    def test_no_reading_after_the_trace_ends(self, market_view):
        builder, _ = market_view
        state, _ = prosumer_step(_alice([1], [0]), ProsumerState(), 0, builder.view())
        _, txs = prosumer_step(_alice([1], [0]), state, 1, builder.view())
        assert txs == []

    def test_emitted_transactions_verify(self, market_view):
        builder, _ = market_view
        _, txs = prosumer_step(_alice([5000], [0]), ProsumerState(), 0, builder.view())
        assert all(verify_transaction(tx, builder.genesis.key_registry) for tx in txs)

    @pytest.mark.parametrize("compliance, metered", [("1", 4000), ("1/2", 4500), ("0", 5000)])
    def test_dr_order_on_chain_adjusts_the_reading(self, builder, compliance, metered):
        keys = builder.keys
        meter = contract_address(keys.alice.address, 0)
        deploy, dr = builder.deploy(
            keys.aggregator,
            DRInit(prosumer=keys.alice.address, meter=meter, congestion_point="cp-1", baseline=tuple([5000] * 24)),
        )
        builder.add_block([deploy])
        issue = builder.tx(
            keys.aggregator,
            dr,
            TxKind.DR_ISSUE_ORDER,
            IssueOrderBody(
                window_start=10,
                window_end=11,
                direction=Direction.REDUCE,
                amount_wh=1000,
                incentive_rate=200,
                penalty_rate=100,
                congestion_point="cp-1",
            ),
        )
        builder.add_block([issue])
        view = builder.view()
        assert len(read_obligations(view, keys.alice.address)) == 1

        config = _alice([5000] * 11, [0] * 11, dr_compliance=compliance, flex_capacity_wh=1000)
        state, txs = prosumer_step(config, ProsumerState(), 10, view)
        reading = EnergyReading.model_validate_json(txs[1].payload)
        assert (reading.slot, reading.energy_wh) == (10, metered)
        assert state.obligations[0].contract == dr


# ============================================================================
# DSO AND MARKET OPERATOR
# ============================================================================


class TestScriptedActors:
    def test_dso_raises_signals_at_their_tick(self):
        signal = CongestionSignal(
            tick=5, congestion_point="cp-1", required_flex_wh=800, window_start=20, window_end=22
        )
        dso = DSOAgent([signal])
        assert dso.step(4) == []
        assert dso.step(5) == [signal]

    def test_congestion_window_must_be_ordered(self):
        with pytest.raises(ValidationError):
            CongestionSignal(tick=0, congestion_point="cp", required_flex_wh=1, window_start=3, window_end=3)

    def test_market_operator_deploys_then_requests_clearings(self, builder):
        operator = MarketOperatorAgent(builder.keys.operator, slots=2)
        view = builder.view()
        (deploy,) = operator.step(view, 0)
        assert deploy.kind is TxKind.DEPLOY
        (request,) = operator.step(view, 1)
        assert request.kind is TxKind.ORACLE_REQUEST
        assert request.receiver == builder.genesis.oracle
        assert b'"slot":0' in request.payload
        operator.step(view, 2)
        assert operator.step(view, 3) == []
