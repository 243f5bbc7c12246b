import logging
import os

import matplotlib
from matplotlib.figure import Figure
import pandas as pd

from core.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = {
    "pr-curve": ["m", "r_V", "precision", "recall", "is_rv_star", "is_fbeta_argmax"],
    "bound-curve": ["n", "w2_lower", "precision_worst"],
}

# Fixed salt and no timestamp: identical tables give byte-identical SVG.
SVG_RC = {"svg.hashsalt": "dr-audit", "svg.fonttype": "path", "path.simplify": False}


def _pr_curve(ax, table: pd.DataFrame):
    series = "k" if "k" in table.columns else "m"
    for key, group in table.groupby(series, sort=True):
        group = group.sort_values("r_V")
        line, = ax.plot(group["recall"], group["precision"], linewidth=1.2, label=f"{series}={key}")
        star = group[group["is_rv_star"].astype(bool)]
        best = group[group["is_fbeta_argmax"].astype(bool)]
        ax.plot(star["recall"], star["precision"], "o", color=line.get_color(), markersize=6)
        ax.plot(best["recall"], best["precision"], "x", color=line.get_color(), markersize=7)
    ax.plot([], [], "o", color="gray", label="optimal r_V")
    ax.plot([], [], "x", color="gray", label="best f-beta")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0.0, 1.02)
    ax.set_ylim(0.0, 1.02)
    ax.set_title("Precision/recall as r_V varies")


def _bound_curve(ax, table: pd.DataFrame):
    table = table.sort_values("n")
    ax.semilogy(table["n"], table["w2_lower"].clip(lower=1e-300), "o-", label="W2^2 lower bound")
    ax.semilogy(table["n"], table["precision_worst"], "s-", label="worst-case precision bound")
    if "w2_asymptote" in table.columns:
        ax.semilogy(table["n"], table["w2_asymptote"], "--", color="gray", label="(R - r_U)^2")
    ax.set_xlabel("intrinsic dimension n")
    ax.set_title("Bounds as the intrinsic dimension grows")


def emit_plot(table: pd.DataFrame, kind: str, path: str) -> str:
    """
    Writes a standalone SVG of a simulation table (pr-curve) or a bound table (bound-curve).
    Nothing is written when the table is empty or lacks the columns of its kind.
    """
    if kind not in REQUIRED_COLUMNS:
        raise InvalidArgumentError(f"Unknown plot kind {kind!r}; expected one of {sorted(REQUIRED_COLUMNS)}")
    if table is None or table.empty:
        raise InvalidArgumentError(f"Cannot plot an empty table ({kind})")
    missing = [c for c in REQUIRED_COLUMNS[kind] if c not in table.columns]
    if missing:
        raise InvalidArgumentError(f"Table lacks columns {missing} needed for a {kind} plot")

    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(6.4, 4.8))
        ax = fig.add_subplot(1, 1, 1)
        if kind == "pr-curve":
            _pr_curve(ax, table)
        else:
            _bound_curve(ax, table)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize="small")
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            logger.error(f"Could not write plot to {path}: {e}")
            raise
    logger.info(f"Wrote {kind} plot to {path}")
    return path
