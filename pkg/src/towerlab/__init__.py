"""Bernoulli Young tower models of nonuniformly expanding interval maps.

Subpackage map:

* ``schemes``        -- induced full-branch expanding schemes (doubling,
                        piecewise-linear, intermittent) with exact constants
* ``coding``         -- word space, cylinders, tower points, coding maps and
                        their Lipschitz/semiconjugacy/pushforward checks
* ``disintegration`` -- exact measure disintegration over words and
                        moment-transfer verification
* ``engine``         -- transfer operator on finite towers, admissible
                        constants, redistribution sequences, water-filling,
                        the word decomposition and geometric return-time laws
* ``iid``            -- two-sided iid shift representation, its factor map,
                        and functional-dependence estimates
* ``stats``          -- Birkhoff sums, variance growth, CLT and tail fits
* ``cli``            -- config-driven pipelines emitting JSON/CSV reports
"""

__version__ = "0.1.0"
