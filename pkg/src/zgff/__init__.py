"""zgff: a simulation and numerical-verification lab for (2+1)D integer
|grad phi|^p random surfaces above a hard floor (p = 2 is the Discrete
Gaussian), their level lines, and the Ferrari-Spohn limit of the top ones."""

__version__ = "0.1.0"
