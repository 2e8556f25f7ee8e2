import os

import networkx as nx

from scripts.structure import StructurePlan, dependency_graph

# -------------------- Plan Graph Export --------------------

def build_plan_graph(plan: StructurePlan) -> nx.DiGraph:
    """
    Dependency graph of a plan with GraphML-friendly attributes: one node per
    directive (labelled with its bars), an edge from every directive to each
    directive that reads its bars.
    """
    graph = dependency_graph(plan)
    graph.graph["title"] = plan.title
    graph.graph["bars_total"] = plan.bars_total
    for i, d in enumerate(plan.directives):
        node = graph.nodes[i]
        node["label"] = d.label()
        node["semitones"] = d.semitones
        node["alpha"] = d.alpha
        node["source"] = f"{d.source[0]}-{d.source[1]}" if d.source else ""
    for u, v in graph.edges:
        graph.edges[u, v]["relation"] = plan.directives[v].kind.value
    return graph


def export_plan_graph(plan: StructurePlan, filepath: str) -> nx.DiGraph:
    """
    Exports the plan dependency graph to GraphML (for Gephi or yEd).

    Args:
        plan: The structure plan.
        filepath: Output path for the exported graph.
    """
    graph = build_plan_graph(plan)
    directory = os.path.dirname(filepath)
    if directory:
        os.makedirs(directory, exist_ok=True)
    nx.write_graphml(graph, filepath)
    print(f"✅ Exported plan graph with {graph.number_of_nodes()} directives and "
          f"{graph.number_of_edges()} dependencies to {filepath}")
    return graph
