import math


def tabbed(x):
	if x:
		return math.sqrt(x)
	return 0


def tabbed_nested(y):
	def helper(z):
		return z + 1
	return helper(y)
