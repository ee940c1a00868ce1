"""
Tests for the oracle loop over chain snapshots, offline evaluation and the
MCP tool wrappers
"""

import orjson
import pytest

from gridchain.contracts.models import Side
from gridchain.contracts.payloads import MarketInit, OracleRequestBody, OracleResponseBody, SubmitOrderBody
from gridchain.errors import OracleServiceError
from gridchain.ledger.primitives import TxKind
from gridchain.mcp_tools import oracle_tools
from gridchain.oracle.models import Horizon
from gridchain.oracle.service import OracleService, answer_request, evaluate_service, oracle_step

pytestmark = pytest.mark.unit


@pytest.fixture
def clearing_request(builder):
    """A market with one crossing bid and offer for slot 5 and a pending clear request"""
    keys = builder.keys
    deploy, market = builder.deploy(keys.operator, MarketInit())
    builder.add_block([deploy])
    orders = [
        builder.tx(
            key,
            market,
            TxKind.MARKET_SUBMIT_ORDER,
            SubmitOrderBody(side=side, owner=key.address, qty_wh=5000, limit_price=price, slot=5),
        )
        for key, side, price in ((keys.alice, Side.BID, 300), (keys.bob, Side.OFFER, 200))
    ]
    request = builder.tx(
        keys.operator,
        keys.oracle.address,
        TxKind.ORACLE_REQUEST,
        OracleRequestBody(service="clear", target=market, params={"slot": 5}),
    )
    builder.add_block([*orders, request])
    assert all(r.ok for r in builder.receipts[-1])
    return builder, market


class TestOracleStep:
    def test_one_pending_request_gets_one_response(self, clearing_request):
        builder, market = clearing_request
        (response,) = oracle_step(builder.view(), builder.tip.tick, builder.keys.oracle)
        assert response.kind is TxKind.ORACLE_RESPONSE
        assert response.sender == builder.keys.oracle.address
        body = OracleResponseBody.model_validate_json(response.payload)
        assert body.ok and body.result["clearing_price"] == 250

    def test_no_pending_requests(self, metered_chain):
        assert oracle_step(metered_chain.view(), 6, metered_chain.keys.oracle) == []

    def test_same_view_same_output(self, clearing_request):
        builder, _ = clearing_request
        view = builder.view()
        first = oracle_step(view, 3, builder.keys.oracle)
        second = oracle_step(view, 3, builder.keys.oracle)
        assert [tx.encode() for tx in first] == [tx.encode() for tx in second]

    def test_committed_response_settles_the_market(self, clearing_request):
        builder, market = clearing_request
        responses = oracle_step(builder.view(), builder.tip.tick, builder.keys.oracle)
        builder.add_block(responses)

        world = builder.world
        assert world.oracle_requests[0].status == "answered"
        assert world.contract(market).cleared_slots == (5,)
        assert world.balance_of(builder.keys.alice.address) == -1250
        assert oracle_step(builder.view(), builder.tip.tick, builder.keys.oracle) == []

    def test_missing_history_becomes_a_failure_response(self, metered_chain):
        keys = metered_chain.keys
        request = metered_chain.tx(
            keys.aggregator,
            keys.oracle.address,
            TxKind.ORACLE_REQUEST,
            OracleRequestBody(
                service="forecast",
                params={"device": metered_chain.alice_meter.hex(), "horizon": "day-ahead", "from_slot": 24},
            ),
        )
        metered_chain.add_block([request])
        (record,) = metered_chain.world.pending_requests()
        body = answer_request(record, metered_chain.view())
        assert not body.ok
        assert "gaps" in body.error

        metered_chain.add_block(oracle_step(metered_chain.view(), 8, keys.oracle))
        assert metered_chain.world.oracle_requests[record.id].status == "failed"

    def test_malformed_parameters_become_a_failure_response(self, metered_chain):
        keys = metered_chain.keys
        request = metered_chain.tx(
            keys.aggregator,
            keys.oracle.address,
            TxKind.ORACLE_REQUEST,
            OracleRequestBody(service="flex", params={"target_wh": -5}),
        )
        metered_chain.add_block([request])
        (record,) = metered_chain.world.pending_requests()
        body = answer_request(record, metered_chain.view())
        assert not body.ok and body.error.startswith("malformed request")

    def test_service_refuses_a_key_that_is_not_the_oracle(self, clearing_request):
        builder, _ = clearing_request
        with pytest.raises(OracleServiceError):
            OracleService(builder.keys.alice).step(builder.view(), 3)

    def test_service_counts_distinct_responses(self, clearing_request):
        builder, _ = clearing_request
        service = OracleService(builder.keys.oracle)
        service.step(builder.view(), 3)
        service.step(builder.view(), 3)
        assert service.emitted == 1


class TestOfflineEvaluation:
    def test_clear(self):
        payload = {
            "bids": [{"id": 0, "qty_wh": 5000, "limit_price": 300}],
            "offers": [{"id": 1, "qty_wh": 5000, "limit_price": 200}],
        }
        result = evaluate_service("clear", payload)
        assert result["clearing_price"] == 250 and result["total_qty_wh"] == 5000

    def test_forecast(self):
        result = evaluate_service("forecast", {"history": [5] * 48, "horizon": Horizon.INTRA_DAY.value})
        assert result["values"] == [5] * 8

    def test_coalition(self):
        service = {
            "service_id": "svc",
            "capacity_wh_per_slot": 6000,
            "max_response_slots": 2,
            "dispatch_slots": 1,
            "price_rate": 200,
            "penalty_rate": 100,
        }
        assets = [
            {"asset_id": i, "capacity_wh_per_slot": c, "response_time_slots": 1, "max_dispatch_slots": 2, "cost_rate": 100}
            for i, c in enumerate((3000, 4000))
        ]
        result = evaluate_service("coalition", {"assets": assets, "service": service})
        assert [m["scheduled_wh"] for m in result["members"]] == [3000, 3000]

    def test_unknown_service(self):
        with pytest.raises(OracleServiceError):
            evaluate_service("weather", {})


class TestMcpTools:
    def test_flexibility_tool_returns_sorted_json(self):
        candidates = [
            {"id": "A", "flex_wh": 2000, "cost": 400},
            {"id": "B", "flex_wh": 3000, "cost": 500},
            {"id": "C", "flex_wh": 5000, "cost": 1000},
        ]
        result = orjson.loads(oracle_tools.select_flexibility_subset(candidates, 5000))
        assert result["chosen"] == ["A", "B"] and result["total_cost"] == 900

    def test_baseline_tool(self):
        result = orjson.loads(oracle_tools.compute_baseline_profile([900] * 24 + [1000] * 24 + [1100] * 24))
        assert set(result["slot_wh"]) == {1000}

    def test_errors_come_back_as_messages(self):
        message = oracle_tools.forecast_energy([1, 2, 3])
        assert message.startswith("Error forecasting")

    def test_malformed_input_is_reported(self):
        message = oracle_tools.clear_order_book([{"id": 0, "qty_wh": 0, "limit_price": 1}], [])
        assert message.startswith("Error clearing market")

    def test_tool_logs_its_call(self, mocker):
        spy = mocker.spy(oracle_tools.logger, "info")
        oracle_tools.form_vpp_coalition([], {"service_id": "s", "capacity_wh_per_slot": 1,
                                             "max_response_slots": 0, "dispatch_slots": 1,
                                             "price_rate": 0, "penalty_rate": 0})
        spy.assert_called_once_with("[MCP Tool] coalition called")
