"""
Closed-form per-round communication cost for every algorithm, in scalars,
and the per-agent count of parameters updated in a round.
"""
from typing import Dict, Iterable, Mapping

from apps.nn_core.layout import ParamLayout
from apps.topology.graphs import Graph

BOOTSTRAP = 'bootstrap'


def expected_cost_per_round(algorithm: str, graph: Graph, layout: ParamLayout,
                            active_out: Mapping[int, Iterable[int]] = None,
                            fine_tuning: bool = False) -> int:
    """
    D-SGD sum_i d_i N_v; GATTA sum_i d_i (N_wg + F); CE-GATTA
    sum_i d_i N_wg + sum_i |active_out_i| F; FL 2 N N_v; IL 0; RepDL
    sum_i d_i N_wg; GT-DSGD sum_i d_i 2 N_v; the GATTA head bootstrap
    sum_i d_i F.
    """
    degree_sum = int(graph.degrees.sum())
    n_v, n_wg, head = layout.total, layout.n_global, layout.head_size

    if algorithm == 'dsgd':
        return degree_sum * n_v
    if algorithm == 'dsgd_ft':
        return 0 if fine_tuning else degree_sum * n_v
    if algorithm == 'gatta':
        return degree_sum * (n_wg + head)
    if algorithm == 'ce_gatta':
        if active_out is None:
            raise ValueError("CE-GATTA cost needs every agent's active outgoing set")
        return degree_sum * n_wg + sum(len(set(out)) for out in active_out.values()) * head
    if algorithm == 'fl':
        return 2 * graph.n * n_v
    if algorithm == 'il':
        return 0
    if algorithm == 'repdl':
        return degree_sum * n_wg
    if algorithm == 'gt_dsgd':
        return degree_sum * 2 * n_v
    if algorithm == BOOTSTRAP:
        return degree_sum * head
    raise ValueError(f"Unknown algorithm {algorithm!r}")


UPDATED_PARAMETERS: Dict[str, str] = {
    'dsgd': 'n_v',
    'dsgd_ft': 'n_v',
    'fl': 'n_v',
    'il': 'n_v',
    'repdl': 'n_v',
    'gt_dsgd': '2n_v',
    'gatta': 'n_v+2f',
    'ce_gatta': 'n_v+2f',
}


def updated_parameter_count(algorithm: str, layout: ParamLayout) -> int:
    """GATTA updates w_g, w_lu and beta: N_wg + F + 2F = N_v + 2F."""
    rule = UPDATED_PARAMETERS.get(algorithm)
    if rule is None:
        raise ValueError(f"Unknown algorithm {algorithm!r}")
    n_v, head = layout.total, layout.head_size
    return {'n_v': n_v, '2n_v': 2 * n_v, 'n_v+2f': n_v + 2 * head}[rule]
