"""
Aggregator Agent
Scripted aggregator and VPP operator: requests baselines, deploys DR
contracts, procures flexibility for DSO congestion signals, issues and settles
flexibility orders, and runs the VPP's service requests and settlements
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

from pydantic import BaseModel

from gridchain.contracts.models import (
    DispatchRecord,
    DRContractState,
    EnergyReading,
    MeterContractState,
    OracleRequestRecord,
    ServiceSpec,
    VPPContractState,
)
from gridchain.contracts.payloads import (
    DeliveredEnergy,
    DRInit,
    DRSettleBody,
    IssueOrderBody,
    OracleRequestBody,
    VPPInit,
    VPPSettleBody,
)
from gridchain.ledger.crypto import NULL_ADDRESS, Address, KeyPair, contract_address
from gridchain.ledger.node import ChainView
from gridchain.ledger.primitives import Transaction, TxKind, make_transaction
from gridchain.oracle.models import (
    BaselineParams,
    CoalitionParams,
    FlexCandidate,
    FlexParams,
    FlexSelection,
)
from gridchain.agents.dso_agent import CongestionSignal

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContractedProsumer:
    """What the aggregator knows about a prosumer it may contract"""

    address: Address
    congestion_point: str
    flex_capacity_wh: int
    flex_cost_rate: int


@dataclass(frozen=True)
class ServiceRequest:
    tick: int
    window_start: int
    service: ServiceSpec


def flex_cost(prosumer: ContractedProsumer, window_slots: int) -> int:
    return prosumer.flex_cost_rate * prosumer.flex_capacity_wh * window_slots // 1000


def vpp_delivered(
    dispatch: DispatchRecord, vpp: VPPContractState, view: ChainView
) -> list[DeliveredEnergy] | None:
    """Per-member delivered energy over the window, None while readings are missing"""
    delivered = []
    for member in dispatch.members:
        asset = vpp.asset(member.asset_id)
        assert asset is not None
        metered = view.reading_series(asset.meter, dispatch.window_start, dispatch.window_end)
        if metered is None:
            return None
        total = sum(
            min(max(asset.baseline.at(slot) - wh, 0), member.scheduled_wh)
            for slot, wh in zip(range(dispatch.window_start, dispatch.window_end), metered)
        )
        delivered.append(DeliveredEnergy(asset_id=member.asset_id, delivered_wh=total))
    return delivered


class AggregatorAgent:
    def __init__(
        self,
        key: KeyPair,
        prosumers: Sequence[ContractedProsumer],
        baseline_tick: int,
        run_dr: bool,
        run_vpp: bool,
        services: Sequence[ServiceRequest] = (),
    ) -> None:
        self.key = key
        self.prosumers = {p.address: p for p in prosumers}
        self.baseline_tick = baseline_tick
        self.run_dr = run_dr
        self.run_vpp = run_vpp
        self.services = list(services)
        self.nonce = 0
        self.vpp: Address | None = None
        self.dr_contracts: dict[Address, Address] = {}
        self._handled_requests: set[int] = set()
        self._settled: set[tuple[Address, str]] = set()
        self._pending_signals: list[CongestionSignal] = []

    @property
    def address(self) -> Address:
        return self.key.address

    def _emit(
        self, out: list[Transaction], receiver: Address, kind: TxKind, body: BaseModel
    ) -> Address:
        """Sign with the next nonce; returns the address a deploy would create"""
        created = contract_address(self.address, self.nonce)
        out.append(make_transaction(self.key, receiver, self.nonce, kind, body))
        self.nonce += 1
        return created

    def _request(self, out: list[Transaction], view: ChainView, body: OracleRequestBody) -> None:
        self._emit(out, view.genesis.oracle, TxKind.ORACLE_REQUEST, body)

    def step(
        self, view: ChainView, tick: int, signals: Sequence[CongestionSignal] = ()
    ) -> list[Transaction]:
        out: list[Transaction] = []
        if tick == 0 and self.run_vpp:
            self.vpp = self._emit(out, NULL_ADDRESS, TxKind.DEPLOY, VPPInit())
            logger.info(f"Aggregator deploying VPP at {self.vpp.short()}")

        if tick == self.baseline_tick:
            self._request_baselines(out, view, tick)

        my_requests = view.requests_by(self.address)
        for record in my_requests:
            if record.id in self._handled_requests or record.status == "pending":
                continue
            self._handled_requests.add(record.id)
            if record.status != "answered":
                logger.warning(
                    f"Aggregator request {record.id} ({record.service}) {record.status}: "
                    f"{record.error}"
                )
                continue
            if record.service == "baseline" and self.run_dr:
                self._deploy_dr(out, record, view)
            elif record.service == "flex":
                self._issue_orders(out, record)

        self._pending_signals.extend(signals)
        self._procure(out, view, tick)

        if self.vpp is not None:
            for request in self.services:
                if request.tick == tick:
                    self._request(
                        out,
                        view,
                        OracleRequestBody(
                            service="coalition",
                            target=self.vpp,
                            params=CoalitionParams(
                                service=request.service, window_start=request.window_start
                            ).model_dump(mode="json"),
                        ),
                    )

        self._settle_dr(out, view, tick)
        self._settle_vpp(out, view, tick)
        return out

    # ------------------------------------------------------------- baselines

    def _request_baselines(self, out: list[Transaction], view: ChainView, tick: int) -> None:
        meters = {state.metadata.owner: address for address, state in view.contracts_of("meter")}
        for prosumer in sorted(self.prosumers):
            meter = meters.get(prosumer)
            if meter is None:
                logger.warning(f"No meter on chain for prosumer {prosumer.short()}")
                continue
            params = BaselineParams(device=meter, before_slot=tick)
            self._request(
                out,
                view,
                OracleRequestBody(service="baseline", params=params.model_dump(mode="json")),
            )

    def _deploy_dr(
        self, out: list[Transaction], record: OracleRequestRecord, view: ChainView
    ) -> None:
        assert record.result is not None
        params = BaselineParams.model_validate(record.params)
        meter = view.contract(params.device)
        if not isinstance(meter, MeterContractState) or meter.metadata.owner not in self.prosumers:
            return
        prosumer = self.prosumers[meter.metadata.owner]
        init = DRInit(
            prosumer=prosumer.address,
            meter=params.device,
            congestion_point=prosumer.congestion_point,
            baseline=tuple(record.result["slot_wh"]),
        )
        self.dr_contracts[prosumer.address] = self._emit(out, NULL_ADDRESS, TxKind.DEPLOY, init)

    # ------------------------------------------------------ demand response

    def _dr_ready(self, view: ChainView, tick: int) -> bool:
        """Baselines answered and every DR contract deployed so far is on chain"""
        if tick <= self.baseline_tick:
            return False
        if any(
            r.service == "baseline" and r.status == "pending" for r in view.requests_by(self.address)
        ):
            return False
        return all(view.contract(d) is not None for d in self.dr_contracts.values())

    def _procure(self, out: list[Transaction], view: ChainView, tick: int) -> None:
        """Turn congestion signals into flexibility requests once DR contracts exist"""
        if not self._pending_signals or not self._dr_ready(view, tick):
            return
        for signal in self._pending_signals:
            candidates = []
            for prosumer_address, dr_address in sorted(self.dr_contracts.items()):
                prosumer = self.prosumers[prosumer_address]
                dr = view.contract(dr_address)
                if (
                    isinstance(dr, DRContractState)
                    and dr.congestion_point == signal.congestion_point
                    and prosumer.flex_capacity_wh > 0
                ):
                    candidates.append(
                        FlexCandidate(
                            id=dr_address.hex(),
                            flex_wh=prosumer.flex_capacity_wh,
                            cost=flex_cost(prosumer, signal.window_end - signal.window_start),
                        )
                    )
            params = FlexParams(
                congestion_point=signal.congestion_point,
                window_start=signal.window_start,
                window_end=signal.window_end,
                target_wh=signal.required_flex_wh,
                candidates=tuple(candidates),
                direction=signal.direction,
                incentive_rate=signal.incentive_rate,
                penalty_rate=signal.penalty_rate,
            )
            logger.info(
                f"Aggregator procuring {signal.required_flex_wh} Wh at {signal.congestion_point} "
                f"from {len(candidates)} candidates"
            )
            self._request(
                out,
                view,
                OracleRequestBody(service="flex", params=params.model_dump(mode="json")),
            )
        self._pending_signals = []

    def _issue_orders(self, out: list[Transaction], record: OracleRequestRecord) -> None:
        params = FlexParams.model_validate(record.params)
        selection = FlexSelection.model_validate(record.result)
        flex = {c.id: c.flex_wh for c in params.candidates}
        residual = params.target_wh
        for candidate_id in sorted(selection.chosen):
            amount = min(flex[candidate_id], residual)
            residual -= amount
            if amount <= 0:
                continue
            self._emit(
                out,
                Address.from_hex(candidate_id),
                TxKind.DR_ISSUE_ORDER,
                IssueOrderBody(
                    window_start=params.window_start,
                    window_end=params.window_end,
                    direction=params.direction,
                    amount_wh=amount,
                    incentive_rate=params.incentive_rate,
                    penalty_rate=params.penalty_rate,
                    congestion_point=params.congestion_point,
                ),
            )

    def _settle_dr(self, out: list[Transaction], view: ChainView, tick: int) -> None:
        for address, dr in view.contracts_of("dr"):
            if dr.aggregator != self.address:
                continue
            for order in dr.orders:
                key = (address, str(order.id))
                if key in self._settled or dr.is_settled(order.id) or tick < order.window_end:
                    continue
                metered = view.reading_series(dr.meter, order.window_start, order.window_end)
                if metered is None:
                    continue
                readings = tuple(
                    EnergyReading(slot=slot, energy_wh=wh, device=dr.meter)
                    for slot, wh in zip(order.slots, metered)
                )
                self._emit(
                    out,
                    address,
                    TxKind.DR_SETTLE,
                    DRSettleBody(order_id=order.id, metered=readings),
                )
                self._settled.add(key)

    # ----------------------------------------------------------------- VPP

    def _settle_vpp(self, out: list[Transaction], view: ChainView, tick: int) -> None:
        if self.vpp is None:
            return
        vpp = view.contract(self.vpp)
        if not isinstance(vpp, VPPContractState):
            return
        settled = {s.service_id for s in vpp.settlements}
        for dispatch in vpp.dispatches:
            key = (self.vpp, dispatch.service_id)
            if key in self._settled or dispatch.service_id in settled:
                continue
            if tick < dispatch.window_end:
                continue
            delivered = vpp_delivered(dispatch, vpp, view)
            if delivered is None:
                continue
            self._emit(
                out,
                self.vpp,
                TxKind.VPP_SETTLE,
                VPPSettleBody(service_id=dispatch.service_id, delivered=tuple(delivered)),
            )
            self._settled.add(key)
