"""Graph generators shared by several test modules."""
from gcurate.dataset import GraphRecord


def random_graph(rng, max_nodes=12, self_loops=True):
    n = int(rng.integers(1, max_nodes + 1))
    edges = set()
    for _ in range(int(rng.integers(0, n * 2 + 1))):
        u, v = sorted(int(x) for x in rng.integers(0, n, size=2))
        if u == v and not self_loops:
            continue
        edges.add((u, v))
    return GraphRecord(f"r{n}", n, tuple(sorted(edges)))


def relabel(graph, perm):
    edges = tuple(tuple(sorted((int(perm[u]), int(perm[v])))) for u, v in graph.edges)
    return GraphRecord(graph.id, graph.num_nodes, edges)
