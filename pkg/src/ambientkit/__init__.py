"""Order-by-order ambient expansion for manifolds with density.

Subpackages are layered: jets (series arithmetic) -> fields (expressions) ->
geometry (weighted curvature) -> ambient (the expansion solver) -> volume /
obstruction / gjms / flows (derived objects) -> scenarios / suites / report ->
service (HTTP wrapper) and cli (thin client).
"""

__version__ = "0.1.0"
