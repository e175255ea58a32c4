"""
Interface en ligne de commande.

Les résultats vont sur stdout (JSON ou CSV), la configuration résolue et
les diagnostics sur stderr. Codes de sortie : 0 succès, 1 erreur de calcul,
2 erreur d'usage (arguments, JSON, validation).
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

import capacity
import gaussian
import reverse_shannon as rst
from channels import ChannelSpec, dephasing, depolarizing, erasure, noiseless
from config import CSV_FLOAT_FORMAT, DEFAULT_CE_TOL, SIG_DIGITS, configure_logging, get_settings
from errors import QcapError
from typeclasses import typical_subspace_report

logger = logging.getLogger(__name__)

# (nom, constructeur, C de référence, C_E de référence)
TABLE1 = [
    ("Noiseless qubit channel", lambda: noiseless(2), 1.0, 2.0),
    ("50% erasure qubit channel", lambda: erasure(2, 0.5), 0.5, 1.0),
    ("2/3 depolarizing qubit channel", lambda: depolarizing(2, 2 / 3), 0.0817, 0.2075),
    ("100% dephasing qubit channel", lambda: dephasing(2), 1.0, 1.0),
]


class UsageError(Exception):
    pass


def _clean(value):
    """Arrondi à SIG_DIGITS chiffres significatifs ; infini -> "inf"."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return None
        return float(f"{float(value):.{SIG_DIGITS}g}")
    return value


def _emit_json(payload) -> None:
    print(json.dumps(_clean(payload), indent=2, ensure_ascii=False))


def _emit_csv(frame: pd.DataFrame) -> None:
    sys.stdout.write(frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT))


def _banner(title: str, config: dict) -> None:
    print("=" * 60, file=sys.stderr)
    print(title, file=sys.stderr)
    print("=" * 60, file=sys.stderr)
    for key, value in config.items():
        print(f"  • {key}: {value}", file=sys.stderr)
    print("=" * 60, file=sys.stderr)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"Liste de nombres invalide: {text}") from exc


# ---------------------------------------------------------------------------
# Commandes
# ---------------------------------------------------------------------------

def cmd_table1(args) -> int:
    rows = []
    for name, build, c_reference, ce_reference in TABLE1:
        ch = build()
        ce = capacity.ce_maximize(ch).value
        chi = capacity.orthogonal_input_chi(ch)
        rows.append(
            {
                "channel": name,
                "ce": ce,
                "ce_reference": ce_reference,
                "ce_delta": abs(ce - ce_reference),
                "chi_orthogonal": chi,
                "c_reference": c_reference,
                "chi_delta": abs(chi - c_reference),
            }
        )
    _emit_json({"rows": rows})
    return 0


def _load_channel(args) -> ChannelSpec:
    if args.spec:
        return ChannelSpec.model_validate_json(Path(args.spec).read_text(encoding="utf-8"))
    if args.preset:
        return ChannelSpec.from_preset(args.preset)
    raise UsageError("Indiquer --spec fichier.json ou --preset kind:params")


def cmd_capacity(args) -> int:
    ch = _load_channel(args).build()
    if args.what == "chi":
        _emit_json({"chi_orthogonal": capacity.orthogonal_input_chi(ch)})
        return 0
    if args.observable is not None:
        diag = _floats(args.observable)
        constraint = capacity.EnergyConstraint(observable=np.diag(diag), bound=args.bound)
        result = capacity.ce_maximize_constrained(ch, constraint, tol=args.tol)
    else:
        result = capacity.ce_maximize(ch, tol=args.tol)
    _emit_json(result.to_json())
    return 0


def cmd_sweep(args) -> int:
    p_values = _floats(args.p)
    if any(not 0.0 <= p <= 1.0 for p in p_values):
        raise UsageError(f"Les valeurs de p doivent être dans [0, 1] (reçu: {p_values})")
    _emit_csv(capacity.ad_sweep(p_values))
    return 0


def cmd_gaussian(args) -> int:
    if args.grid == "custom":
        if not (args.S and args.N):
            raise UsageError("La grille custom exige --S et --N")
        grid = gaussian.GaussianGrid(S=_floats(args.S), N=_floats(args.N), k=_floats(args.k or "1"))
    else:
        grid = gaussian.figure_grids()[args.grid]
    _emit_csv(gaussian.sweep(grid))
    return 0


def _rst_channel(args):
    if args.dmc:
        return rst.DMC.model_validate_json(Path(args.dmc).read_text(encoding="utf-8"))
    if args.bsc is not None:
        return float(args.bsc)
    raise UsageError("Indiquer --dmc fichier.json ou --bsc p")


def _rst_config(args, channel) -> rst.ProtocolConfig:
    variant = args.variant or ("bsc" if isinstance(channel, float) else "general")
    return rst.ProtocolConfig(n=args.n, eps=args.eps, variant=variant, z_size=getattr(args, "zsize", None))


def cmd_rst(args) -> int:
    channel = _rst_channel(args)
    if args.action == "fallback":
        if not isinstance(channel, float):
            raise UsageError("Le calcul analytique du repli n'existe que pour --bsc")
        _emit_json(rst.bsc_fallback_probability(channel, args.n, args.eps).model_dump())
        return 0
    cfg = _rst_config(args, channel)
    if args.action == "simulate":
        try:
            rst.parse_source(args.source, channel, args.n)
        except QcapError as exc:
            raise UsageError(str(exc)) from exc
        stats = rst.cost_statistics(channel, cfg, args.trials, source=args.source, seed=args.seed)
        _emit_json(stats.model_dump())
    elif args.action == "verify-exact":
        _emit_json({"deviation": rst.exact_faithfulness_oracle(channel, cfg)})
    else:
        if args.x is None:
            raise UsageError("La commande run exige --x")
        R = rst.SharedRandomness(seed=args.seed)
        output, transcript = rst.simulate(channel, cfg, R, args.x)
        received = rst.receive(transcript.payload, channel, cfg, R)
        _emit_json({"transcript": transcript.model_dump(), "received": list(received), "consistent": received == output})
    return 0


def cmd_typical(args) -> int:
    report = typical_subspace_report(np.diag(_floats(args.probs)), args.n, args.delta, args.eps)
    payload = report.model_dump()
    payload["dim"] = str(report.dim) if report.dim > 2**53 else report.dim
    _emit_json(payload)
    return 0


# ---------------------------------------------------------------------------
# Analyse des arguments
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcap", description="Capacités assistées par intrication et Shannon inverse")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING...")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("table1", help="Reproduit le tableau des capacités")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("capacity", help="C_E (ou chi) d'un canal")
    p.add_argument("what", choices=["ce", "chi"])
    p.add_argument("--preset")
    p.add_argument("--spec")
    p.add_argument("--tol", type=float, default=DEFAULT_CE_TOL)
    p.add_argument("--observable", help="diagonale de l'observable d'énergie, ex. 0,1")
    p.add_argument("--bound", type=float, default=0.0)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("sweep", help="Balayage du canal d'amortissement")
    p.add_argument("family", choices=["ad"])
    p.add_argument("--p", required=True, help="ex. 0,0.5,0.9")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gaussian", help="Table du canal gaussien")
    p.add_argument("--grid", default="ratio-vs-noise", choices=[*gaussian.figure_grids(), "custom"])
    p.add_argument("--S")
    p.add_argument("--N")
    p.add_argument("--k")
    p.set_defaults(func=cmd_gaussian)

    p = sub.add_parser("rst", help="Protocole de Shannon inverse")
    p.add_argument("action", choices=["simulate", "verify-exact", "fallback", "run"])
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--dmc")
    group.add_argument("--bsc", type=float)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--source", default="itc-uniform")
    p.add_argument("--variant", choices=["bsc", "general"])
    p.add_argument("--zsize", type=int)
    p.add_argument("--x")
    p.set_defaults(func=cmd_rst)

    p = sub.add_parser("typical", help="Propriétés du sous-espace typique")
    p.add_argument("action", choices=["check"])
    p.add_argument("--probs", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.1)
    p.set_defaults(func=cmd_typical)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.log_level)
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    resolved["threads"] = get_settings().threads
    _banner(f"qcap {args.verb}", resolved)
    try:
        code = args.func(args)
    except (UsageError, ValidationError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"⚠️ Erreur d'usage: {exc}", file=sys.stderr)
        return 2
    except QcapError as exc:
        print(f"⚠️ Erreur de calcul: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # presets et listes mal formés
        print(f"⚠️ Erreur d'usage: {exc}", file=sys.stderr)
        return 2
    logger.debug("Commande %s terminée (code %d)", args.verb, code)
    print("✓ Terminé", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
