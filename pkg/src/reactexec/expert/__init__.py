from .arm import (
    ArmModel,
    Frame,
    combined_loss,
    forward_kinematics,
    frame_points,
    jacobian,
    joint_space_loss,
    op_space_loss,
    op_space_loss_grad,
)
from .dataset import Trajectory, dataset_rows, dense_goal_samples, generate_trajectories, resolve_goal_cell
from .search import AraConfig, AraSolution, Circle, CSpaceGrid, NoPath, ara_star, path_cost
