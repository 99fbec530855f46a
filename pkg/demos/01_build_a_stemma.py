"""
Building and interrogating a stemma
===================================

A stemma is a rooted tree whose nodes are witnesses (manuscripts) and
whose edges are copying events.  This script builds one by hand, asks it
the usual questions, and round-trips it through the on-disk format.
"""

from stemmaplace import Stemma, distance_matrix, load_stemma

# Edges are (parent, child) pairs; the root is the node nobody copies from.
edges = [
    ("archetype", "alpha"),
    ("archetype", "beta"),
    ("alpha", "A1"),
    ("alpha", "A2"),
    ("beta", "B1"),
    ("beta", "B2"),
    ("B2", "B2a"),
]
tree = Stemma(edges)

print("root:", tree.root)
print("leaves:", tree.leaves())
print("internal:", tree.internal_nodes())
print("children of beta:", tree.children("beta"))
print("parent of B2a:", tree.parent("B2a"))

# All pairwise edge distances at once.  The matrix is symmetric with a
# zero diagonal; get() works by node id.
dm = distance_matrix(tree)
print("\ndistance A1 -> B2a:", dm.get("A1", "B2a"))
print("largest distance between leaves:", dm.max_distance(among=tree.leaves()))

# Removing a leaf gives the backbone a placement run works against.
backbone = tree.remove_leaf("B2a")
print("\nbackbone after removing B2a:", backbone.nodes)

# The serialization is a plain parent<TAB>child edge list, one per line.
text = tree.to_edge_list_text()
print("\nedge-list form:")
print(text)
again = load_stemma(text)
assert again.edges == tree.edges

# Newick with each node labeled, for tree viewers.
print("newick:", tree.to_newick())
