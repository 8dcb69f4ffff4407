'''Minimizing-movement solver for u_t = Δe^{−Δu} with Neumann boundary conditions.'''
__version__ = "0.1.0"
