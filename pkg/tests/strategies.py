"""Hypothesis strategies for small auction instances."""
from hypothesis import strategies as st

from wtcore.model import Bid, Bidder, Instance


@st.composite
def instances(draw, max_goods=5, max_bidders=6, max_xor=2, integer_values=True):
    goods = draw(st.integers(1, max_goods))
    n = draw(st.integers(1, max_bidders))
    value = st.integers(1, 30).map(float) if integer_values else st.floats(0.5, 50.0, allow_nan=False)
    bidders = []
    for i in range(n):
        bundles = draw(
            st.lists(
                st.frozensets(st.integers(0, goods - 1), min_size=1, max_size=min(3, goods)),
                min_size=1, max_size=max_xor, unique=True,
            )
        )
        bidders.append(Bidder(i, tuple(Bid(tuple(sorted(b)), draw(value)) for b in bundles)))
    return Instance(goods, tuple(bidders))
