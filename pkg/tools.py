from typing import Annotated

# Camera scale of the tracking setup.
MICROMETERS_PER_PIXEL = 1.29


# 1. Pixels to Micrometers
def pixels_to_micrometers(
    pixels: Annotated[float, "Length measured in camera pixels."],
    scale_um_per_px: Annotated[float, "Camera scale in micrometers per pixel."] = MICROMETERS_PER_PIXEL,
) -> float:
    """Converts a camera-frame length into micrometers. Light-pattern wavelengths are specified in projector/camera pixels while the controller search box is expressed in micrometers."""
    return pixels * scale_um_per_px


# 2. Micrometers to Pixels
def micrometers_to_pixels(
    micrometers: Annotated[float, "Length in micrometers."],
    scale_um_per_px: Annotated[float, "Camera scale in micrometers per pixel."] = MICROMETERS_PER_PIXEL,
) -> float:
    """Converts a physical length into camera pixels, the unit in which light patterns are rendered."""
    return micrometers / scale_um_per_px


# 3. Speed in Bodylength Percent per Second
def speed_to_bodylength_percent(
    speed_um_per_s: Annotated[float, "Speed in micrometers per second."],
    bodylength_um: Annotated[float, "Length of the microrobot body in micrometers."],
) -> float:
    """Normalizes a speed on the robot's bodylength and expresses it in bodylength percent per second (%BL/s), which makes robots of different sizes comparable."""
    if bodylength_um <= 0:
        raise ValueError(f"bodylength must be positive, got {bodylength_um}")
    return 100.0 * speed_um_per_s / bodylength_um


# 4. Bodylength Percent per Second to Speed
def bodylength_percent_to_speed(
    speed_pct_bl: Annotated[float, "Speed in bodylength percent per second."],
    bodylength_um: Annotated[float, "Length of the microrobot body in micrometers."],
) -> float:
    """Inverse of the bodylength normalization: returns the absolute speed in micrometers per second."""
    if bodylength_um <= 0:
        raise ValueError(f"bodylength must be positive, got {bodylength_um}")
    return speed_pct_bl * bodylength_um / 100.0


# 5. Optimistic Signal Standard Deviation
def is_optimistic_signal_std(
    mean_const: Annotated[float, "Constant prior mean of the cost (%BL/s)."],
    signal_std: Annotated[float, "Prior signal standard deviation (%BL/s)."],
) -> bool:
    """Tells whether a zero cost lies inside the 95% band of the GP prior, i.e. mean - 2*std < 0. An optimistic signal variance encourages exploration, a pessimistic one keeps the search close to what it has seen."""
    return signal_std > mean_const / 2.0


# 6. Relative Speed Gain
def relative_speed_gain(
    initial_speed: Annotated[float, "Speed of the initial controller."],
    new_speed: Annotated[float, "Speed of the learned controller."],
) -> float:
    """Computes the locomotion improvement of a learned controller over the initial one, in percent. A value of 100 means the robot moves twice as fast."""
    if initial_speed == 0:
        raise ValueError("initial speed is zero, relative gain undefined")
    return 100.0 * (new_speed - initial_speed) / abs(initial_speed)


# 7. Relative Cost Reduction
def relative_cost_reduction(
    initial_cost: Annotated[float, "Cost of the initial controller."],
    new_cost: Annotated[float, "Cost of the learned controller."],
) -> float:
    """Computes how much the learned controller reduced the cost, in percent of the initial cost."""
    if initial_cost == 0:
        raise ValueError("initial cost is zero, relative reduction undefined")
    return 100.0 * (initial_cost - new_cost) / initial_cost
