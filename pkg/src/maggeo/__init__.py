"""maggeo: a numerical laboratory for closed magnetic geodesics on tori.

Finds and classifies closed orbits of exact magnetic flows at prescribed
energy: local minimizers of the free-period action, minimax (mountain
pass) orbits over iterated loop classes, and the associated index data
(twisted-boundary Morse indices, splitting numbers, mean index, linear
stability).
"""

__version__ = "0.1.0"
