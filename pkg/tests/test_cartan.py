import pytest

from qca.cartan import (
    NotSimplyLaced,
    UnknownDiagram,
    cartan_matrix,
    edge_count,
    entry_values,
    validate_simply_laced,
)


def test_a1_a2_frozen():
    assert cartan_matrix("A1") == [[2]]
    assert cartan_matrix("A2") == [[2, -1], [-1, 2]]


def test_a3_frozen():
    assert cartan_matrix("A3") == [[2, -1, 0], [-1, 2, -1], [0, -1, 2]]


def test_d4_central_node():
    A = cartan_matrix("D4")
    validate_simply_laced(A)
    # Bourbaki D4: node 2 bonds to 1, 3, 4
    assert A[1] == [-1, 2, -1, -1]
    assert edge_count(A) == 3


def test_e_series_shapes():
    for name, edges in (("E6", 5), ("E7", 6), ("E8", 7)):
        A = cartan_matrix(name)
        validate_simply_laced(A)
        assert edge_count(A) == edges
        # trivalent node 4 in Bourbaki numbering
        assert sum(1 for v in A[3] if v == -1) == 3


def test_rejects_bad_names():
    for bad in ("B2", "D3", "E9", "A0", "Ax", "Z"):
        with pytest.raises(UnknownDiagram):
            cartan_matrix(bad)


def test_validate_catches_asymmetry():
    with pytest.raises(NotSimplyLaced):
        validate_simply_laced([[2, -1], [0, 2]])
    with pytest.raises(NotSimplyLaced):
        validate_simply_laced([[2, -2], [-2, 2]])
    with pytest.raises(NotSimplyLaced):
        validate_simply_laced([[1]])


def test_entry_values():
    assert entry_values(cartan_matrix("A1")) == {2}
    assert entry_values(cartan_matrix("A3")) == {2, -1, 0}
