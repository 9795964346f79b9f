from hypothesis import given, settings
from hypothesis import strategies as st

from termhide.terms import Struct, Symbol, Var, VarFactory, mgu, occurs, resolve, struct, term_vars, undo, unify, variant_key, atom

A = atom("a")
B = atom("b")


def test_unify_binds_and_undoes():
    X, Y = Var(0, "X"), Var(1, "Y")
    s, trail = {}, []
    assert unify(struct("f", X, B), struct("f", A, Y), s, trail)
    assert resolve(struct("g", X, Y), s) == struct("g", A, B)
    undo(s, trail, 0)
    assert s == {}


def test_unify_clash_and_int():
    assert mgu(struct("f", A), struct("f", B)) is None
    assert mgu(1, 1) == {}
    assert mgu(1, 2) is None
    assert mgu(A, 1) is None


def test_module_qualification_distinguishes_functors():
    user_tree = Struct(Symbol("tree", 0))
    bt_tree = Struct(Symbol("tree", 0, "bt"))
    assert mgu(user_tree, bt_tree) is None


def test_younger_variable_is_bound():
    X, Y = Var(0), Var(1)
    s = mgu(X, Y)
    assert s == {Y: X}


def test_occurs():
    X = Var(0)
    assert occurs(X, struct("f", struct("g", X)), {})
    assert not occurs(X, struct("f", A), {})


def test_term_vars_order():
    X, Y = Var(5), Var(2)
    assert term_vars(struct("f", Y, struct("g", X, Y))) == [Y, X]


def test_variant_key():
    X, Y, Z = Var(0), Var(1), Var(2)
    assert variant_key(struct("f", X, Y, X)) == variant_key(struct("f", Z, X, Z))
    assert variant_key(struct("f", X, Y)) != variant_key(struct("f", X, X))


def test_var_factory():
    f = VarFactory(10)
    assert f().id == 10 and f("Q").id == 11


# -- properties ----------------------------------------------------------

_VARS = [Var(i, f"V{i}") for i in range(4)]


def _terms():
    leaf = st.sampled_from([A, B, 0, 7, *_VARS])
    return st.recursive(
        leaf,
        lambda kids: st.one_of(
            st.builds(lambda x: struct("f", x), kids),
            st.builds(lambda x, y: struct("g", x, y), kids, kids),
        ),
        max_leaves=8,
    )


def _cyclic(s):
    return any(occurs(v, t, {k: u for k, u in s.items() if k is not v}) for v, t in s.items())


@settings(max_examples=300)
@given(_terms(), _terms())
def test_mgu_unifies(t1, t2):
    s = mgu(t1, t2)
    if s is not None and not _cyclic(s):
        assert resolve(t1, s) == resolve(t2, s)


@settings(max_examples=200)
@given(_terms(), _terms())
def test_mgu_symmetric_success(t1, t2):
    assert (mgu(t1, t2) is None) == (mgu(t2, t1) is None)


@settings(max_examples=200)
@given(_terms())
def test_unify_with_self(t):
    assert mgu(t, t) == {}
