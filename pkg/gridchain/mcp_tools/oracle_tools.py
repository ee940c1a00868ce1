"""
MCP Tools for the Oracle Services
Forecasting, market clearing, flexibility selection, coalition formation and
baselines exposed as tools over stdio, evaluated away from any chain
"""

import logging

import orjson
from mcp.server.fastmcp import FastMCP
from pydantic import ValidationError

from gridchain.errors import GridchainError
from gridchain.oracle.service import evaluate_service
from gridchain.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

# Initialize MCP server
mcp = FastMCP("gridchain-oracle")


def _run(service: str, payload: dict) -> str:
    logger.info(f"[MCP Tool] {service} called")
    result = evaluate_service(service, payload)
    return orjson.dumps(result, option=orjson.OPT_SORT_KEYS).decode()


@mcp.tool()
def forecast_energy(history: list[int], horizon: str = "day-ahead") -> str:
    """Seasonal-naive energy forecast

    Args:
        history: Per-slot energy in Wh, hourly for day-ahead, half-hourly for intra-day
        horizon: day-ahead (24 hourly values) or intra-day (8 half-hour values)

    Returns:
        str: JSON forecast, or an error message
    """
    try:
        return _run("forecast", {"history": history, "horizon": horizon})
    except (GridchainError, ValidationError) as e:
        return f"Error forecasting: {e}"


@mcp.tool()
def clear_order_book(bids: list[dict], offers: list[dict], slot: int = 0) -> str:
    """Clear a one-slot order book at a uniform price

    Args:
        bids: Orders as {"id", "qty_wh", "limit_price"}
        offers: Orders as {"id", "qty_wh", "limit_price"}
        slot: Delivery slot of the book

    Returns:
        str: JSON clearing result with price and matches, or an error message
    """
    try:
        return _run("clear", {"bids": bids, "offers": offers, "slot": slot})
    except (GridchainError, ValidationError) as e:
        return f"Error clearing market: {e}"


@mcp.tool()
def select_flexibility_subset(candidates: list[dict], target_wh: int) -> str:
    """Cheapest set of prosumers whose flexibility covers a target

    Args:
        candidates: Entries as {"id", "flex_wh", "cost"}
        target_wh: Flexibility to cover in Wh

    Returns:
        str: JSON selection (chosen ids, totals, feasibility), or an error message
    """
    try:
        return _run("flex", {"candidates": candidates, "target_wh": target_wh})
    except (GridchainError, ValidationError) as e:
        return f"Error selecting flexibility: {e}"


@mcp.tool()
def form_vpp_coalition(assets: list[dict], service: dict) -> str:
    """Coalition of VPP assets able to deliver a service

    Args:
        assets: Entries as {"asset_id", "capacity_wh_per_slot", "response_time_slots",
            "sync_time_slots", "max_dispatch_slots", "band", "cost_rate"}
        service: {"service_id", "capacity_wh_per_slot", "max_response_slots",
            "dispatch_slots", "price_rate", "penalty_rate"} plus optional
            "max_sync_slots" and "band"

    Returns:
        str: JSON coalition plan with scheduled members, or an error message
    """
    try:
        return _run("coalition", {"assets": assets, "service": service})
    except (GridchainError, ValidationError) as e:
        return f"Error forming coalition: {e}"


@mcp.tool()
def compute_baseline_profile(
    history: list[int], dr_windows: list[list[int]] | None = None, slots_per_day: int = 24
) -> str:
    """Baseline demand from the three most recent days without DR windows

    Args:
        history: Per-slot energy in Wh starting at slot 0
        dr_windows: [start, end) slot ranges of past DR orders (optional)
        slots_per_day: Slots per day of the history (default: 24)

    Returns:
        str: JSON baseline profile, or an error message
    """
    try:
        payload = {
            "history": history,
            "dr_windows": dr_windows or [],
            "slots_per_day": slots_per_day,
        }
        return _run("baseline", payload)
    except (GridchainError, ValidationError) as e:
        return f"Error computing baseline: {e}"


def main() -> None:
    setup_logging()
    mcp.run(transport="stdio")


if __name__ == "__main__":
    main()
