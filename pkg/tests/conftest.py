"""Shared fixtures: the worked itinerary example and CSV helpers."""

from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from airpanel import ingest, panel, sample


def write_csv(directory: Path, name: str, text: str) -> Path:
    path = directory / name
    path.write_text(textwrap.dedent(text).lstrip())
    return path


def cho_dfw_files(
    directory: Path, footnote_variant: bool = False, with_third_major: bool = False
) -> dict[str, Path]:
    """Encode the two-segment-path CHO-DFW itinerary example as input CSVs.

    AA carries 100 passengers via CLT (first leg flown by the independent
    regional OO) and 50 via PHL; DL carries 200 via ATL on its own metal. A
    small DL itinerary in RIC-ATL flown by OO links DL to OO elsewhere. The
    footnote variant has OO fly DL's first CHO-DFW leg too; the third-major
    variant adds a UA path with no regional usage.
    """
    coupons = [
        "IT1,1,AA,OO,CHO,CLT,100,150,2010,2",
        "IT1,2,AA,AA,CLT,DFW,100,300,2010,2",
        "IT2,1,AA,AA,CHO,PHL,50,50,2010,2",
        "IT2,2,AA,AA,PHL,DFW,50,450,2010,2",
        f"IT3,1,DL,{'OO' if footnote_variant else 'DL'},CHO,ATL,200,200,2010,2",
        "IT3,2,DL,DL,ATL,DFW,200,250,2010,2",
        "IT4,1,DL,OO,RIC,ATL,10,400,2010,2",
    ]
    tickets = [
        "IT1,220,false,true,false,2,0",
        "IT2,250,false,true,false,2,0",
        "IT3,180,false,true,false,2,0",
        "IT4,100,false,true,false,1,0",
    ]
    markets = [
        "IT1,0,CHO,DFW",
        "IT2,0,CHO,DFW",
        "IT3,0,CHO,DFW",
        "IT4,0,RIC,ATL",
    ]
    if with_third_major:
        coupons += [
            "IT5,1,UA,UA,CHO,ORD,50,220,2010,2",
            "IT5,2,UA,UA,ORD,DFW,50,480,2010,2",
        ]
        tickets.append("IT5,240,false,true,false,2,0")
        markets.append("IT5,0,CHO,DFW")

    return {
        "coupons": write_csv(
            directory, "coupons.csv",
            ",".join(ingest.COUPON_COLUMNS) + "\n" + "\n".join(coupons) + "\n",
        ),
        "tickets": write_csv(
            directory, "tickets.csv",
            ",".join(ingest.TICKET_COLUMNS) + "\n" + "\n".join(tickets) + "\n",
        ),
        "markets": write_csv(
            directory, "markets.csv",
            ",".join(ingest.MARKET_COLUMNS) + "\n" + "\n".join(markets) + "\n",
        ),
    }


def build_cho_dfw_sample(directory: Path, **kwargs):
    directory.mkdir(parents=True, exist_ok=True)
    files = cho_dfw_files(directory, **kwargs)
    coupons = ingest.parse_coupons(files["coupons"]).records
    tickets = ingest.parse_tickets(files["tickets"]).records
    markets = ingest.parse_markets(files["markets"]).records
    states = ingest.load_default_airport_states()
    obs, drops = sample.build_directional_trips(coupons, tickets, markets, states)
    assert len(drops) == 0
    obs, _ = sample.trim_fares(obs, {2010: 1.0})
    return obs


@pytest.fixture
def registry() -> ingest.CarrierRegistry:
    return ingest.load_default_registry()


@pytest.fixture
def cho_dfw_obs(tmp_path, registry):
    return build_cho_dfw_sample(tmp_path)


@pytest.fixture
def cho_dfw_panel(cho_dfw_obs, registry):
    return panel.aggregate_panel(cho_dfw_obs, registry)
