#include "pipelines.hpp"

namespace dnr::cli {

// Kept in sync with docs/config-schema.txt (a test compares the two).
const char* schema_text() {
    return R"SCHEMA(# Experiment file schema
#
# Format: ini-style sections of 'key = value' lines, '#' starts a comment.
# Unknown keys are ignored; unknown section names are ignored unless a
# pipeline requires them.  All floats accept plain decimal notation.
# Lists are comma separated; tuple lists use ';' between tuples.

[experiment]
pipeline = <forward | gauge-check | recover-da | recover-q | quasilinear |
            carleman-audit | moll-audit>          # required
seed = <int>                                      # RNG seed, default 1

[grid]                     # required by every pipeline
nx = <int>                 # interior points per axis, >= 1
ny = <int>
nt = <int>                 # time steps, >= 1
Lx = <float>               # side lengths, > 0 (default 1)
Ly = <float>
T  = <float>               # final time, > 0 (default 1)

[c1]                       # coefficient triple (A, B, q); also [c2]
A = <vector preset | file:x.csv,y.csv>     # default zero
A.<param> = <float>        # preset parameters: amp, cx, cy, r, tdep, ax, ay,
                           # dirx, diry, kx, ky (preset dependent)
B = <vector preset | file:...>
B.<param> = <float>
q = <scalar preset | file:field.csv>
q.<param> = <float>
# scalar presets: zero constant bump sine indicator
# vector presets: zero constant bump vortex gradient-of-bump solenoidal-bump
# tabulated files carry x,y,t,value columns on the exact grid nodes

[scheme]                   # optional solver controls
theta = <float>            # 1 = implicit Euler (default), 0.5 = Crank-Nicolson

[data]                     # forward pipeline boundary/initial data
g  = <scalar preset>       # Dirichlet trace sampled on the lateral boundary
u0 = <scalar preset>       # initial cap (default zero)
f  = <scalar preset>       # interior source (optional)

[output]
stride = <int>             # node stride of solution.csv (default 1)

[gauge]                    # gauge-check pipeline
count = <int>              # number of random gauge functions (default 3)
amplitude = <float>        # gauge amplitude (default 0.25)
tolerance = <float>        # relative deviation bound (default 0.02)
halving_factor = <float>   # refined/base deviation bound (default 0.6)
refine = <bool>            # run the (h, dt) refinement (default true)

[probes]                   # recover-da pipeline
rho_list = <floats>        # default 8,16,32,64
kmax_xi = <int>            # frequency window |k|_inf <= kmax (default 8)
kmax_tau = <int>
dn_points = kx,ky,kt; ...  # reduced lattice for the DN pairing channel
rho_h_max = <float>        # grid scaling rule rho*h <= this (default 0.5)
max_nx = <int>             # cap for the per-rho DN grids (default 127)
tolerance = <float>        # extrapolated window error bound (default 0.10)
hermitian_tol = <float>    # default 1e-8

[zero-order]               # recover-q pipeline
points = kx,ky,kt; ...     # frequency samples (default 1,0,0; 0,1,0; 1,1,1)
rho_list = <floats>        # default 8,16,32
rho_h_max = <float>
max_nx = <int>
tolerance = <float>        # relative bound on |pairing - direct| (default 0.10)
floor = <float>            # absolute floor for trivial rows (default 1e-6)

[quasilinear]              # quasilinear pipeline
m1 = <model>               # zero | linear | sin-u | linear-gauged
m2 = <model>
anchors = a,vx,vy; ...     # affine anchors x.v + a (default 0,1,0.5)
rho_list = <floats>
kmax_xi = <int>
kmax_tau = <int>
margin = <float>           # interior margin for the error norm (default 0.15)
tolerance = <float>        # interior relative error bound (default 0.10)

[m1]                       # model parameters (same for [m2])
a = <vector preset>        # 'linear': F = a.v + q u
a.<param> = <float>
a2 = <vector preset>       # optional second field added to a
q = <scalar preset>
amp = <float>              # 'sin-u': F = amp sin(u)
phi.<param> = <float>      # 'linear-gauged': bump potential of the gauge pair
c0 = <float>               # admissible-class constants (defaults 50,50,1,50)
c1 = <float>
c2 = <float>
c3 = <float>

[carleman]                 # carleman-audit pipeline
s = <float>                # intermediate parameter (default 40)
rho_list = <floats>        # default 2000,3557,6325,11247,20000 (one decade)
omega = <float>,<float>    # direction, normalized (default 1,0)
include_q = <bool>         # add q to the third operator part (default false)

[moll]                     # moll-audit pipeline
field = <scalar preset>    # default indicator
field.<param> = <float>
rho_list = <floats>        # default 8,16,32,64
)SCHEMA";
}

}  // namespace dnr::cli
