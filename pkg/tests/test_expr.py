import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bipsynth import expr as E


def evaluate(text, **values):
    e = E.parse_expression(text)
    env = {k: E.VarInfo(E.BOOL if isinstance(v, bool) else E.int_type(8)) for k, v in values.items()}
    table = E.TypeTable()
    E.check(e, E.env_from(env), table)
    return E.evaluate(e, table, E.make_reader(values))


@pytest.mark.parametrize(
    "text, expected",
    [
        ("true ? 3 : 7", 3),
        ("false ? 3 : 7", 7),
        ("1 + 2 * 3", 7),
        ("(1 + 2) * 3", 9),
        ("!true || true && false", False),
        ("-3 < 2", True),
        ("4 != 4", False),
    ],
)
def test_constant_expressions(text, expected):
    assert evaluate(text) == expected


def test_wraparound_at_width():
    assert evaluate("x + 1", x=127) == -128
    assert E.wrap(255 + 1, E.uint_type(8)) == 0
    assert E.wrap(-1, E.uint_type(3)) == 7


def test_signed_comparison():
    assert evaluate("x < 0", x=-1) is True
    assert evaluate("x >= y", x=-128, y=127) is False


def test_type_errors():
    for text in ("1 && true", "true + 1", "x == true"):
        with pytest.raises(E.ExprTypeError):
            evaluate(text, x=1)


def test_parse_error_position():
    with pytest.raises(E.ParseError) as exc:
        E.parse_expression("a + * b")
    assert exc.value.col == 5


def test_conj_flattens():
    a, b, c = E.Var("a"), E.Var("b"), E.Var("c")
    assert E.format_expr(E.conj(E.conj(a, b), c)) == "a && b && c"
    assert E.format_expr(E.disj(a, E.disj(b, c))) == "a || b || c"
    assert E.conj() == E.TRUE


names = st.sampled_from(["a", "b", "c"])
ints = st.integers(min_value=-20, max_value=20).map(E.IntLit)


def int_exprs():
    return st.recursive(
        st.one_of(ints, names.map(E.Var)),
        lambda sub: st.one_of(
            st.tuples(st.sampled_from(["+", "-", "*"]), sub, sub).map(lambda t: E.Binary(*t)),
            sub.map(lambda x: E.Unary("-", x)),
        ),
        max_leaves=8,
    )


def bool_exprs():
    cmp = st.tuples(st.sampled_from(["<", "<=", "==", "!=", ">", ">="]), int_exprs(), int_exprs()).map(
        lambda t: E.Binary(*t)
    )
    return st.recursive(
        st.one_of(cmp, st.booleans().map(E.BoolLit)),
        lambda sub: st.one_of(
            st.tuples(st.sampled_from(["&&", "||"]), sub, sub).map(lambda t: E.Binary(*t)),
            sub.map(lambda x: E.Unary("!", x)),
            st.tuples(sub, sub, sub).map(lambda t: E.Ternary(*t)),
        ),
        max_leaves=6,
    )


@settings(max_examples=200, deadline=None)
@given(bool_exprs())
def test_print_parse_roundtrip(e):
    text = E.format_expr(e)
    again = E.parse_expression(text)
    assert E.format_expr(again) == text


@settings(max_examples=200, deadline=None)
@given(bool_exprs(), st.integers(-128, 127), st.integers(-128, 127), st.integers(-128, 127))
def test_printing_preserves_meaning(e, a, b, c):
    vals = dict(a=a, b=b, c=c)
    text = E.format_expr(e)
    assert evaluate(text, **vals) == evaluate(E.format_expr(E.parse_expression(text)), **vals)


@given(st.integers(1, 40), st.integers(-(1 << 45), 1 << 45))
def test_bits_roundtrip(width, v):
    ty = E.int_type(width)
    w = E.wrap(v, ty)
    assert -(1 << (width - 1)) <= w < (1 << (width - 1))
    assert E.from_bits(E.to_bits(w, width), ty) == w
