"""
Built-in demo scenarios

The same texts ship as files under demos/; both must parse to equal ASTs.
"""

from pathlib import Path
from typing import Dict

DEMO_NAMES = ("savings", "supply_demand", "lln", "shale", "government", "bankchain")

SAVINGS_SOURCE = """\
-- value as capital: a savings account paying yearly interest, minus a monthly fee
-- one tick is one month; interest is credited at the start of each year
scenario "savings" {
  dt = 1
  horizon = 25
  seed = 0
  pool bank { initial = abundant }
  agent saver { initial = 1000 role = consumer }
  cycle account {
    actor = saver
    va = prop(saver, 1)
    ve = prop(saver, 0.05) from bank
    vl = 5
  }
  at 1 set account.ve = 0
  at 12 set account.ve = 0.05
  at 13 set account.ve = 0
}
"""

SUPPLY_DEMAND_SOURCE = """\
-- value as price: one trade at the equilibrium of pd = -2q + 100 and ps = 3q + 25
-- VA = ks*q, VL = kd*q and VE = pe at q = 15
scenario "supply_demand" {
  dt = 1
  horizon = 1
  seed = 0
  pool buyers { initial = abundant }
  agent seller { initial = 0 role = producer }
  agent treasury { initial = 100 role = government }
  cycle market {
    actor = seller
    va = 45
    ve = 70 from buyers
    vl = -30 to treasury
  }
}
"""

LLN_SOURCE = """\
-- a small market of producers; reported aggregates carry measurement error
scenario "lln" {
  dt = 1
  horizon = 12
  seed = 42
  pool nature { initial = abundant }
  agent households { initial = 1000 role = consumer }
  agent farm { initial = 100 role = producer }
  agent mill { initial = 100 role = producer }
  agent bakery { initial = 100 role = producer }
  agent shop { initial = 100 role = producer }
  cycle farming tag = n {
    actor = farm
    va = 10
    ve = 4 from nature
    vl = 3 to households
  }
  cycle milling tag = n {
    actor = mill
    va = 8
    ve = 6 from farm
    vl = 2 to households
  }
  cycle baking tag = n {
    actor = bakery
    va = prop(bakery, 0.05)
    ve = 5 from mill
    vl = 1.5 to households
  }
  cycle retail tag = n {
    actor = shop
    va = 6
    ve = 7 from bakery
    vl = 2
  }
  cycle spending {
    actor = households
    va = 12
    ve = 2 from shop
    vl = 1
  }
  detect stable_market
}
"""

SHALE_SOURCE = """\
-- government-subsidized industry: a natural cycle plus a credit cycle fed from the future
-- VGn' = 2t and VEg' = 10 - t; subsidies should be withdrawn where they cross
scenario "shale" {
  dt = 0.01
  horizon = 1200
  seed = 0
  pool nature { initial = abundant }
  pool future { initial = abundant }
  agent shale { initial = 100 role = producer }
  agent bank { initial = 500 role = bank }
  cycle natural tag = n {
    actor = shale
    va = ramp(1, 2)
    ve = 3 from nature
    vl = 4 to bank
  }
  cycle credit tag = g {
    actor = shale
    va = 1
    ve = ramp(10, -1) from future
    vl = 1 to bank
  }
  detect subsidy_cross(credit, natural)
  detect max_vg(credit)
}
"""

GOVERNMENT_SOURCE = """\
-- government as an organization: an inner tax cycle and an outer confidence cycle
-- VGg' = 10 - 2t and VGc' = 4 - 2t; the optimum is where VGg' = -VGc'
scenario "government" {
  dt = 0.01
  horizon = 700
  seed = 0
  pool economy { initial = 1000 }
  pool goodwill { initial = 1000 }
  agent government { initial = 100 role = government }
  agent citizens { initial = 500 role = citizens }
  cycle taxes tag = g {
    actor = government
    va = 3
    ve = ramp(8, -2) from economy
    vl = 1 to citizens
  }
  cycle confidence tag = c {
    actor = government
    va = 2
    ve = ramp(3, -2) from goodwill
    vl = 1 to citizens
  }
  detect gov_optimum(taxes, confidence)
}
"""

BANKCHAIN_SOURCE = """\
-- the flow of value: future -> central bank -> bank -> firm -> households
scenario "bankchain" {
  dt = 1
  horizon = 120
  seed = 0
  pool future { initial = abundant }
  pool nature { initial = 5000 }
  agent central_bank { initial = 0 role = central_bank }
  agent bank { initial = 200 role = bank }
  agent firm { initial = 100 role = producer }
  agent government { initial = 50 role = government }
  agent households { initial = 300 role = consumer }
  -- money is printed against future value
  cycle printing {
    actor = central_bank
    va = 1
    ve = 20 from future
    vl = 1 to government
  }
  cycle lending {
    actor = bank
    va = 2
    ve = 15 from central_bank
    vl = prop(bank, 0.01) to central_bank
  }
  cycle borrowing {
    actor = firm
    va = 1
    ve = 10 from bank
    vl = prop(firm, 0.005) to bank
  }
  cycle production tag = n {
    actor = firm
    va = prop(firm, 0.05)
    ve = 40 from nature
    vl = 6 to bank
    vg to households
  }
  cycle consumption {
    actor = households
    va = prop(households, 0.1)
    ve = 5 from firm
    vl = 2 to government
  }
  at 60 jolt lending va 500 from future
  detect max_vg(production)
}
"""

DEMO_SOURCES: Dict[str, str] = {
    "savings": SAVINGS_SOURCE,
    "supply_demand": SUPPLY_DEMAND_SOURCE,
    "lln": LLN_SOURCE,
    "shale": SHALE_SOURCE,
    "government": GOVERNMENT_SOURCE,
    "bankchain": BANKCHAIN_SOURCE,
}


def demo_source(name: str) -> str:
    if name not in DEMO_SOURCES:
        raise KeyError(f"unknown demo '{name}' (expected one of: {', '.join(DEMO_NAMES)})")
    return DEMO_SOURCES[name]


def demo_file(name: str, demo_dir: Path) -> Path:
    return Path(demo_dir) / f"{name}.cyc"
