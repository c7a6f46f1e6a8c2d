"""Magnetic ball-chain catheter simulation and teleoperation toolkit."""

from ballchain.magnetics import (
    MU0,
    Dipole,
    dipole_field,
    dipole_field_jacobian,
    force_on_dipole,
    torque_on_dipole,
    superpose_field,
    force_intensity,
    sphere_moment,
    cylinder_moment,
)
from ballchain.chain import (
    BallSpec,
    SleeveSpec,
    ChainConfig,
    ChainShape,
    EnvField,
    SolverConfig,
    EquilibriumResult,
    total_energy,
    solve_equilibrium,
    tip_tangent,
    tip_tangent_twoball,
    alignment_angle,
    tip_contact_force,
)
from ballchain.actuation import (
    WheelSet,
    ActuationUnit,
    wheel_to_magnet,
    magnet_to_wheel,
    integrate_rotation,
    sensor_reading,
    estimate_dipole_direction,
    reconfigure_step,
    reconfigure_run,
)
from ballchain.sizing import (
    SizingProblem,
    ball_scale_factor,
    solve_magnet_diameter,
    magnet_mass,
    inter_magnet_force,
)
from ballchain.session import (
    Target,
    Scenario,
    ScenarioError,
    TeleopCommand,
    SessionState,
    load_scenario,
    bundled_scenarios,
    new_session,
    step,
    check_targets,
    compute_metrics,
    run_command_log,
    commands_from_log,
    sweep_workspace,
    run_alignment_study,
)

__version__ = "0.1.0"
