from hypothesis import strategies as st

from conftest import nested_to_tree

nested = st.recursive(st.none(), lambda inner: st.tuples(inner, inner), max_leaves=9)
trees = nested.map(nested_to_tree)
