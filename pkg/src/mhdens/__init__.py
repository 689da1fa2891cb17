"""Second-order, unconditionally stable, linear GPAV ensemble solver
for the 2D incompressible MHD equations, with an artificial-viscosity
stabilization option and a benchmark harness."""

__version__ = "0.1.0"
