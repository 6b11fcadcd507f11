"""
Configuration validation report: mixing assumption, learning-rate gate,
the c constraint and per-agent fusion-parameter bounds.
"""
import logging
from typing import Optional, Sequence

from django.conf import settings

from apps.attention.aggregation import mu_lower_bound
from apps.topology.mixing import MixingMatrix

from .bounds import TheoryConstants, abc_constants, c_ceiling, lr_gate, phi_bound, rho_products

logger = logging.getLogger(__name__)


def validation_report(mixing: MixingMatrix, eta: float, T: int, K: int, mu: Optional[float] = None,
                      agents: Sequence = None, L: float = 1.0, c: float = None,
                      constants: TheoryConstants = None, F0: float = None,
                      F_star: float = None) -> dict:
    """
    Hard failures: rho >= 1 and a configured c outside (0, 1/2 - 8 eta^2 T^2 L^2).
    Warnings: eta above the gate and mu below an agent's bound.
    """
    failures, warnings = [], []
    rho = mixing.rho
    report = {
        'rho': rho,
        'spectral_gap': 1.0 - rho,
        'assumption_1': rho < 1.0 - settings.SIMULATION['GAP_TOLERANCE'],
        'eta': eta,
        'T': T,
        'K': K,
    }
    if not report['assumption_1']:
        failures.append(f"Mixing matrix has rho={rho:.6f}; the spectral gap assumption fails")

    if constants is not None:
        L = constants.L
    report['L'] = L
    report['L_source'] = 'estimated' if constants is not None else 'configured'

    if report['assumption_1']:
        A_K, B_K, C_K = abc_constants(rho_products(mixing, K), K)
    else:
        A_K = B_K = C_K = None
    gate = lr_gate(T, L, C_K) if C_K is not None else None
    report.update({'A_K': A_K, 'B_K': B_K, 'C_K': C_K, 'lr_gate': gate,
                   'eta_ok': gate is not None and eta < gate})
    if gate is not None and not report['eta_ok']:
        warnings.append(f"eta={eta:.6g} is not below the learning-rate gate {gate:.6g}")

    ceiling = c_ceiling(eta, T, L)
    report['c_ceiling'] = ceiling
    report['c_automatic'] = c is None
    if c is None:
        c = 0.5 * ceiling if ceiling > 0 else None
        if c is None:
            warnings.append(f"No admissible c exists for eta={eta:.6g}, T={T}, L={L:.6g}")
    elif not 0 < c < ceiling:
        failures.append(f"c={c} violates 0 < c < 1/2 - 8 eta^2 T^2 L^2 = {ceiling:.6g}")
        c = None
    report['c'] = c

    if constants is not None and c is not None and report['assumption_1']:
        tc = TheoryConstants(L=L, chi=constants.chi, kappa=constants.kappa, T=T, eta=eta, K=K, c=c)
        bound = phi_bound(tc, A_K, B_K, mixing.n, F0=F0, F_star=F_star)
        report['phi'] = bound.phi
        report['rhs'] = bound.rhs

    if mu is not None and agents:
        bounds = {}
        for agent in agents:
            if agent.neighbor_heads and agent.active_in:
                bounds[agent.agent_id] = mu_lower_bound(agent.attention_state(), agent.active_in).bound
        report['mu'] = mu
        report['mu_bounds'] = bounds
        below = sorted(i for i, b in bounds.items() if mu < b)
        report['mu_ok'] = not below
        if below:
            warnings.append(f"mu={mu} is below the fusion bound of agents {below}")

    report['hard_failures'] = failures
    report['warnings'] = warnings
    report['passed'] = not failures
    for message in warnings:
        logger.warning(message)
    return report


def _fmt(value) -> str:
    return 'n/a' if value is None else f"{value:.6g}"


def render_report(report: dict) -> str:
    lines = [
        'Validation report',
        f"  rho                {report['rho']:.6f} (gap {report['spectral_gap']:.6f})",
        f"  assumption 1       {'ok' if report['assumption_1'] else 'FAILED'}",
        f"  A_K / B_K / C_K    {_fmt(report['A_K'])} / {_fmt(report['B_K'])} / {_fmt(report['C_K'])}",
        f"  lr gate            {_fmt(report['lr_gate'])} (eta {report['eta']:.6g}, L {report['L']:.6g} {report['L_source']})",
        f"  c                  {report['c'] if report['c'] is not None else 'none'} "
        f"(ceiling {report['c_ceiling']:.6g}{', automatic' if report['c_automatic'] else ''})",
    ]
    if 'phi' in report:
        lines.append(f"  phi                {report['phi']:.6g}")
    if 'mu_bounds' in report:
        worst = max(report['mu_bounds'].values(), default=0.0)
        lines.append(f"  mu                 {report['mu']} (largest agent bound {worst:.6g})")
    for message in report['hard_failures']:
        lines.append(f"  FAIL  {message}")
    for message in report['warnings']:
        lines.append(f"  WARN  {message}")
    lines.append(f"  result             {'PASSED' if report['passed'] else 'FAILED'}")
    return '\n'.join(lines)
