# Generated by Django 6.0.1 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('experiment', models.CharField(blank=True, max_length=30)),
                ('problem_id', models.CharField(blank=True, max_length=200)),
                ('seed', models.CharField(blank=True, max_length=20)),
                ('config_hash', models.CharField(blank=True, max_length=12)),
                ('status', models.CharField(choices=[('success', 'Success'), ('assertion_failed', 'Assertion Failed'), ('config_error', 'Configuration Error'), ('numerical_error', 'Numerical Error')], max_length=20)),
                ('csv_path', models.CharField(blank=True, max_length=500)),
                ('summary', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
