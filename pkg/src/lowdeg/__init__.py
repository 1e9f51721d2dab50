"""Random homogeneous polynomials on spheres: harmonic truncation, jets and loci."""
