"""Simply-laced Cartan matrices with Bourbaki node numbering."""

from __future__ import annotations


class UnknownDiagram(ValueError):
    pass


class NotSimplyLaced(ValueError):
    pass


def _edges_A(r: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(1, r)]


def _edges_D(r: int) -> list[tuple[int, int]]:
    # chain 1-2-...-(r-2), fork at r-2 to both r-1 and r
    return [(i, i + 1) for i in range(1, r - 1)] + [(r - 2, r)]


def _edges_E(r: int) -> list[tuple[int, int]]:
    # Bourbaki: node 2 hangs off node 4 of the chain 1-3-4-5-...-r
    chain = [1, 3] + list(range(4, r + 1))
    edges = [(chain[i], chain[i + 1]) for i in range(len(chain) - 1)]
    edges.append((2, 4))
    return edges


def cartan_matrix(name: str) -> list[list[int]]:
    """Cartan matrix of a simply-laced diagram, e.g. 'A2', 'D4', 'E8'.

    Rows and columns follow Bourbaki numbering of the nodes.
    """
    name = name.strip().upper()
    if len(name) < 2 or name[0] not in "ADE":
        raise UnknownDiagram(f"not a simply-laced diagram name: {name!r}")
    try:
        r = int(name[1:])
    except ValueError:
        raise UnknownDiagram(f"bad rank in {name!r}") from None
    kind = name[0]
    if kind == "A":
        if r < 1:
            raise UnknownDiagram("A_r needs r >= 1")
        edges = _edges_A(r)
    elif kind == "D":
        if r < 4:
            raise UnknownDiagram("D_r needs r >= 4")
        edges = _edges_D(r)
    else:
        if r not in (6, 7, 8):
            raise UnknownDiagram("E_r exists for r in {6, 7, 8}")
        edges = _edges_E(r)
    A = [[2 if i == j else 0 for j in range(r)] for i in range(r)]
    for i, j in edges:
        A[i - 1][j - 1] = -1
        A[j - 1][i - 1] = -1
    return A


def validate_simply_laced(A: list[list[int]]) -> None:
    """Raise unless A is a symmetric simply-laced Cartan matrix."""
    r = len(A)
    for row in A:
        if len(row) != r:
            raise NotSimplyLaced("matrix is not square")
    for i in range(r):
        if A[i][i] != 2:
            raise NotSimplyLaced(f"diagonal entry A[{i}][{i}] != 2")
        for j in range(r):
            if i != j:
                if A[i][j] not in (0, -1):
                    raise NotSimplyLaced(f"off-diagonal A[{i}][{j}] not in {{0,-1}}")
                if A[i][j] != A[j][i]:
                    raise NotSimplyLaced("matrix is not symmetric")


def edge_count(A: list[list[int]]) -> int:
    r = len(A)
    return sum(1 for i in range(r) for j in range(i + 1, r) if A[i][j] == -1)


def entry_values(A: list[list[int]]) -> set[int]:
    """Distinct entries appearing anywhere in A; subset of {-1, 0, 2}."""
    return {v for row in A for v in row}
